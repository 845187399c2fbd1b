#pragma once

// Training cost, energy and carbon arithmetic, plus the offload break-even
// count.
//
// Defaults: $1.00 per A100 GPU-hour, 0.4 kW board power, 0.4235 kg CO2eq per
// kWh. With these, 184,320 GPU-h -> 73,728 kWh / 31.22 tCO2eq and
// 1,720,320 GPU-h -> 688,128 kWh / 291.42 tCO2eq.

#include <cstdint>
#include <string>

#include "llmcomm/error.hpp"
#include "llmcomm/format.hpp"

namespace llmcomm::cost {

struct CostParams {
  double price_usd_per_gpu_hour = 1.0;
  double tdp_kw = 0.4;
  double carbon_kg_per_kwh = 0.4235;
};

struct CostReport {
  double gpu_hours = 0.0;
  double usd = 0.0;
  double kwh = 0.0;
  double tco2eq = 0.0;
};

namespace detail {
inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw Error(Errc::invalid_value, std::string(what) + " must be positive");
}
}  // namespace detail

inline void validate(const CostParams& p) {
  detail::require_positive(p.price_usd_per_gpu_hour, "price_usd_per_gpu_hour");
  detail::require_positive(p.tdp_kw, "tdp_kw");
  detail::require_positive(p.carbon_kg_per_kwh, "carbon_kg_per_kwh");
}

inline double energy_kwh(double gpu_hours, double tdp_kw) {
  detail::require_positive(gpu_hours, "gpu_hours");
  detail::require_positive(tdp_kw, "tdp_kw");
  return gpu_hours * tdp_kw;
}

inline double carbon_tco2(double kwh, double factor_kg_per_kwh) {
  detail::require_positive(kwh, "kwh");
  detail::require_positive(factor_kg_per_kwh, "carbon_kg_per_kwh");
  return kwh * factor_kg_per_kwh / 1000.0;
}

inline double training_usd(double gpu_hours, double price) {
  detail::require_positive(gpu_hours, "gpu_hours");
  detail::require_positive(price, "price_usd_per_gpu_hour");
  return gpu_hours * price;
}

inline CostReport report(double gpu_hours, const CostParams& p = {}) {
  validate(p);
  CostReport r;
  r.gpu_hours = gpu_hours;
  r.usd = training_usd(gpu_hours, p.price_usd_per_gpu_hour);
  r.kwh = energy_kwh(gpu_hours, p.tdp_kw);
  r.tco2eq = carbon_tco2(r.kwh, p.carbon_kg_per_kwh);
  return r;
}

// Smallest number of edge-served exchanges whose saved core bytes cover one
// model transfer.
inline std::uint64_t breakeven_messages(std::uint64_t model_bytes,
                                        std::uint64_t core_bytes_per_exchange) {
  if (model_bytes == 0 || core_bytes_per_exchange == 0)
    throw Error(Errc::invalid_value, "breakeven inputs must be positive");
  return model_bytes / core_bytes_per_exchange +
         (model_bytes % core_bytes_per_exchange != 0 ? 1 : 0);
}

inline std::string to_json(const CostReport& r) {
  return JsonObject{}
      .real("gpu_hours", r.gpu_hours)
      .real("usd", r.usd)
      .real("kwh", r.kwh)
      .real("tco2eq", r.tco2eq)
      .done();
}

}  // namespace llmcomm::cost
