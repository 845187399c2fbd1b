#pragma once

// File-level drivers behind the CLI: run a scenario into an output
// directory, and sweep one scenario key across values in parallel.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "llmcomm/error.hpp"
#include "llmcomm/metrics.hpp"
#include "llmcomm/scenario.hpp"
#include "llmcomm/simulator.hpp"

namespace llmcomm::runner {

enum class Format { json, csv };

struct RunOptions {
  std::optional<std::uint64_t> seed;
  Format format = Format::json;
  bool include_model_transfer = false;
  bool write_logs = false;
};

inline Scenario prepare(nlohmann::json doc, const RunOptions& opt) {
  if (opt.seed && doc.is_object()) doc["seed"] = *opt.seed;
  return parse_scenario(doc);
}

// All files land or none do: everything is written to temporaries first and
// renamed once every write succeeded.
inline void write_all(const std::filesystem::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<fs::path> temps;
  auto cleanup = [&] {
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const auto& [name, content] : files) {
    auto tmp = dir / ("." + name + ".tmp");
    temps.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) {
      cleanup();
      throw Error(Errc::io_error, "cannot write " + tmp.string());
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    fs::rename(temps[i], dir / files[i].first, ec);
    if (ec) {
      cleanup();
      throw Error(Errc::io_error, "cannot rename into " + (dir / files[i].first).string() + ": " + ec.message());
    }
  }
}

inline std::vector<std::pair<std::string, std::string>> render(const sim::Outcome& o, const RunOptions& opt) {
  const bool csv = opt.format == Format::csv;
  const std::string ext = csv ? ".csv" : ".json";
  auto report = [&](const metrics::RunReport& r) { return csv ? metrics::to_csv(r) : metrics::to_json(r) + "\n"; };
  std::vector<std::pair<std::string, std::string>> files{
      {"trace.jsonl", o.result.trace.to_jsonl()},
      {"report" + ext, report(o.report)},
      {"baseline_report" + ext, report(o.baseline_report)},
      {"reduction_report" + ext, csv ? metrics::to_csv(o.reduction) : metrics::to_json(o.reduction) + "\n"},
  };
  if (opt.write_logs) files.emplace_back("logs.jsonl", o.result.logs.to_jsonl());
  return files;
}

inline sim::Outcome exec_run(const nlohmann::json& doc, const std::filesystem::path& out_dir, const RunOptions& opt) {
  const auto sc = prepare(doc, opt);
  auto o = sim::run_with_baseline(sc, opt.include_model_transfer);
  write_all(out_dir, render(o, opt));
  return o;
}

struct SweepRow {
  std::string value;
  metrics::RunReport report;
  metrics::ReductionReport reduction;
};

inline std::string sweep_csv(const std::string& key, const std::vector<SweepRow>& rows) {
  std::string out = "key,value," + std::string(metrics::kReportCsvHeader) + ",baseline_core_bytes,scenario_core_bytes," +
                    "reduction_pct,includes_model_transfer,condition\n";
  for (const auto& r : rows)
    out += key + "," + r.value + "," + metrics::csv_row(r.report) + "," + metrics::csv_row(r.reduction) + "\n";
  return out;
}

// One run per value, each in its own thread and sub-directory `KEY=VALUE`;
// sweep.csv aggregates one row per run in the order the values were given.
inline std::vector<SweepRow> exec_sweep(const nlohmann::json& doc, const std::string& key,
                                        const std::vector<std::string>& values, const std::filesystem::path& out_dir,
                                        const RunOptions& opt) {
  if (values.empty()) throw Error(Errc::invalid_input, "sweep needs at least one value");
  std::vector<Scenario> scenarios;
  for (const auto& v : values) {
    auto d = doc;
    set_path(d, key, v);
    scenarios.push_back(prepare(std::move(d), opt));
  }
  std::vector<std::future<sim::Outcome>> jobs;
  for (const auto& sc : scenarios)
    jobs.push_back(std::async(std::launch::async, [&sc, &opt] { return sim::run_with_baseline(sc, opt.include_model_transfer); }));

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto o = jobs[i].get();
    write_all(out_dir / (key + "=" + values[i]), render(o, opt));
    rows.push_back({values[i], o.report, o.reduction});
  }
  write_all(out_dir, {{"sweep.csv", sweep_csv(key, rows)}});
  return rows;
}

}  // namespace llmcomm::runner
