#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "llmcomm/costmodel.hpp"
#include "llmcomm/error.hpp"
#include "llmcomm/protocol.hpp"
#include "llmcomm/runner.hpp"
#include "llmcomm/scenario.hpp"

namespace {

using namespace llmcomm;

struct ScenarioArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string format = "json";
  bool include_model_transfer = false;
  bool logs = false;
};

void add_scenario_flags(CLI::App* cmd, ScenarioArgs& a, bool with_outputs) {
  cmd->add_option("--scenario", a.scenario, "scenario JSON file")->required();
  cmd->add_option("--seed", a.seed, "override the scenario seed");
  if (!with_outputs) return;
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
  cmd->add_option("--format", a.format, "report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  cmd->add_flag("--include-model-transfer", a.include_model_transfer,
                "count model transfer bytes as scenario core traffic in the reduction report");
  cmd->add_flag("--logs", a.logs, "also write logs.jsonl with every model-generated response");
}

runner::RunOptions options(const ScenarioArgs& a) {
  runner::RunOptions o;
  o.seed = a.seed;
  o.format = a.format == "csv" ? runner::Format::csv : runner::Format::json;
  o.include_model_transfer = a.include_model_transfer;
  o.write_logs = a.logs;
  return o;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Presence-routed, model-mediated messaging simulator"};
  app.require_subcommand(1);

  ScenarioArgs run_args, sweep_args, validate_args;
  auto* run = app.add_subcommand("run", "simulate a scenario and its direct-communication baseline");
  add_scenario_flags(run, run_args, true);

  std::string sweep_spec;
  auto* sweep = app.add_subcommand("sweep", "run one scenario per value of a key, in parallel");
  add_scenario_flags(sweep, sweep_args, true);
  sweep->add_option("--sweep", sweep_spec, "KEY=V1,V2,... where KEY is a dotted path, e.g. flows.0.max_messages")
      ->required();

  auto* validate = app.add_subcommand("validate", "parse and check a scenario without running it");
  add_scenario_flags(validate, validate_args, false);

  double gpu_hours = 0.0;
  bool from_pretrained = false;
  double fine_tune_factor = 0.01;
  cost::CostParams prices;
  auto* cost_cmd = app.add_subcommand("cost", "training cost, energy and carbon as one JSON object");
  cost_cmd->add_option("--gpu-hours", gpu_hours, "GPU-hours of the training run")->required();
  cost_cmd->add_option("--price", prices.price_usd_per_gpu_hour, "USD per GPU-hour")->capture_default_str();
  cost_cmd->add_option("--tdp-kw", prices.tdp_kw, "board power per GPU in kW")->capture_default_str();
  cost_cmd->add_option("--carbon", prices.carbon_kg_per_kwh, "kg CO2eq per kWh")->capture_default_str();
  cost_cmd->add_flag("--from-pretrained", from_pretrained, "fine-tune from a pre-trained model");
  cost_cmd->add_option("--fine-tune-factor", fine_tune_factor, "GPU-hour multiplier for fine-tuning")
      ->capture_default_str();

  bool table = false;
  auto* routes = app.add_subcommand("routes", "print the routing decision table as CSV");
  routes->add_flag("--table", table, "print the full table (default)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      runner::exec_run(read_json_file(run_args.scenario), run_args.out, options(run_args));
      std::cout << "wrote " << run_args.out << "\n";
    } else if (*sweep) {
      const auto eq = sweep_spec.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == sweep_spec.size())
        throw Error(Errc::invalid_input, "--sweep expects KEY=V1,V2,...");
      const auto key = sweep_spec.substr(0, eq);
      auto rows = runner::exec_sweep(read_json_file(sweep_args.scenario), key, split(sweep_spec.substr(eq + 1), ','),
                                     sweep_args.out, options(sweep_args));
      std::cout << "wrote " << rows.size() << " runs to " << sweep_args.out << "\n";
    } else if (*validate) {
      runner::RunOptions o;
      o.seed = validate_args.seed;
      runner::prepare(read_json_file(validate_args.scenario), o);
      std::cout << "ok\n";
    } else if (*cost_cmd) {
      if (!(fine_tune_factor > 0.0)) throw Error(Errc::invalid_value, "fine_tune_factor must be positive");
      const double effective = from_pretrained ? gpu_hours * fine_tune_factor : gpu_hours;
      std::cout << cost::to_json(cost::report(effective, prices)) << "\n";
    } else if (*routes) {
      std::cout << route_table_csv();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
