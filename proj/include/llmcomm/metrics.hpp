#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "llmcomm/format.hpp"
#include "llmcomm/netsim.hpp"
#include "llmcomm/protocol.hpp"

namespace llmcomm::metrics {

struct RunReport {
  std::uint64_t messages_sent = 0;
  std::uint64_t delivered_direct = 0;
  std::uint64_t llm_served = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t held = 0;
  std::uint64_t core_bytes = 0;
  std::uint64_t access_bytes = 0;
  std::uint64_t model_transfer_bytes = 0;
  double latency_mean_s = 0.0;
  double latency_p50_s = 0.0;
  double latency_p95_s = 0.0;
  double llm_hit_rate = 0.0;
  std::uint64_t log_records = 0;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

// Nearest-rank: the ceil(p/100 * n)-th smallest sample (1-based).
inline double nearest_rank_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

inline double nearest_rank(std::vector<double> samples, double p) {
  std::sort(samples.begin(), samples.end());
  return nearest_rank_sorted(samples, p);
}

inline RunReport summarize(const net::Trace& trace) {
  RunReport r;
  std::vector<double> latencies;
  double latency_sum = 0.0;
  for (const auto& e : trace.entries()) {
    if (e.logged) ++r.log_records;
    if (e.kind == net::TraceKind::transfer_complete) {
      r.model_transfer_bytes += e.model_bytes;
      continue;
    }
    for (const auto& c : e.charges) (c.cls == net::LinkClass::core ? r.core_bytes : r.access_bytes) += c.bytes;
    if (e.kind != net::TraceKind::message) continue;

    ++r.messages_sent;
    switch (parse_action(e.action).value_or(RoutingAction::DeliverDirect)) {
      case RoutingAction::DeliverDirect: ++r.delivered_direct; break;
      case RoutingAction::LLMServe: ++r.llm_served; break;
      case RoutingAction::ForwardToRecipient: ++r.forwarded; break;
      case RoutingAction::HoldInactive: ++r.held; break;
    }
    const double l = e.network_s + e.service_s;
    latencies.push_back(l);
    latency_sum += l;
  }
  if (!latencies.empty()) {
    r.latency_mean_s = latency_sum / static_cast<double>(latencies.size());
    std::sort(latencies.begin(), latencies.end());
    r.latency_p50_s = nearest_rank_sorted(latencies, 50.0);
    r.latency_p95_s = nearest_rank_sorted(latencies, 95.0);
  }
  if (r.llm_served + r.forwarded > 0)
    r.llm_hit_rate = static_cast<double>(r.llm_served) / static_cast<double>(r.llm_served + r.forwarded);
  return r;
}

struct ReductionReport {
  std::uint64_t baseline_core_bytes = 0;
  std::uint64_t scenario_core_bytes = 0;
  std::optional<double> reduction_pct;  // empty when undefined
  bool includes_model_transfer = false;
  std::string condition = "ok";  // or "undefined_zero_baseline"
};

inline ReductionReport compare(const RunReport& baseline, const RunReport& scenario, bool include_model_transfer) {
  ReductionReport out;
  out.includes_model_transfer = include_model_transfer;
  out.baseline_core_bytes = baseline.core_bytes;
  out.scenario_core_bytes = scenario.core_bytes + (include_model_transfer ? scenario.model_transfer_bytes : 0);
  if (out.baseline_core_bytes > 0) {
    out.reduction_pct = 100.0 * (1.0 - static_cast<double>(out.scenario_core_bytes) /
                                           static_cast<double>(out.baseline_core_bytes));
  } else if (out.scenario_core_bytes == 0) {
    out.reduction_pct = 0.0;
  } else {
    out.condition = "undefined_zero_baseline";
  }
  return out;
}

// --- serialization --------------------------------------------------------

inline const char* kReportCsvHeader =
    "messages_sent,delivered_direct,llm_served,forwarded,held,core_bytes,access_bytes,"
    "model_transfer_bytes,latency_mean_s,latency_p50_s,latency_p95_s,llm_hit_rate,log_records";

inline std::string to_json(const RunReport& r) {
  return JsonObject{}
      .uinteger("messages_sent", r.messages_sent)
      .uinteger("delivered_direct", r.delivered_direct)
      .uinteger("llm_served", r.llm_served)
      .uinteger("forwarded", r.forwarded)
      .uinteger("held", r.held)
      .uinteger("core_bytes", r.core_bytes)
      .uinteger("access_bytes", r.access_bytes)
      .uinteger("model_transfer_bytes", r.model_transfer_bytes)
      .real("latency_mean_s", r.latency_mean_s)
      .real("latency_p50_s", r.latency_p50_s)
      .real("latency_p95_s", r.latency_p95_s)
      .real("llm_hit_rate", r.llm_hit_rate)
      .uinteger("log_records", r.log_records)
      .done();
}

inline std::string csv_row(const RunReport& r) {
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  return u(r.messages_sent) + "," + u(r.delivered_direct) + "," + u(r.llm_served) + "," + u(r.forwarded) + "," +
         u(r.held) + "," + u(r.core_bytes) + "," + u(r.access_bytes) + "," + u(r.model_transfer_bytes) + "," +
         fixed6(r.latency_mean_s) + "," + fixed6(r.latency_p50_s) + "," + fixed6(r.latency_p95_s) + "," +
         fixed6(r.llm_hit_rate) + "," + u(r.log_records);
}

inline std::string to_csv(const RunReport& r) { return std::string(kReportCsvHeader) + "\n" + csv_row(r) + "\n"; }

inline const char* kReductionCsvHeader =
    "baseline_core_bytes,scenario_core_bytes,reduction_pct,includes_model_transfer,condition";

inline std::string to_json(const ReductionReport& r) {
  JsonObject o;
  o.uinteger("baseline_core_bytes", r.baseline_core_bytes).uinteger("scenario_core_bytes", r.scenario_core_bytes);
  if (r.reduction_pct)
    o.real("reduction_pct", *r.reduction_pct);
  else
    o.null("reduction_pct");
  return o.boolean("includes_model_transfer", r.includes_model_transfer).str("condition", r.condition).done();
}

inline std::string csv_row(const ReductionReport& r) {
  return std::to_string(r.baseline_core_bytes) + "," + std::to_string(r.scenario_core_bytes) + "," +
         (r.reduction_pct ? fixed6(*r.reduction_pct) : std::string()) + "," +
         (r.includes_model_transfer ? "true" : "false") + "," + r.condition;
}

inline std::string to_csv(const ReductionReport& r) {
  return std::string(kReductionCsvHeader) + "\n" + csv_row(r) + "\n";
}

}  // namespace llmcomm::metrics
