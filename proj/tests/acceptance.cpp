// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "llmcomm/llmcomm.hpp"

using namespace llmcomm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scenario_path(const std::string& name) { return std::string(LLMCOMM_SCENARIO_DIR) + "/" + name; }

fs::path scratch_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("llmcomm-acceptance-" + std::to_string(::getpid()) + "-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int shell(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Check decision_table() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::istringstream golden(slurp(LLMCOMM_GOLDEN_DIR "/routes.csv"));
  std::string line;
  std::getline(golden, line);
  c.require(line == "status,allowlisted,model_available,answerable,action", "golden header");
  std::map<std::string, std::string> expected;
  while (std::getline(golden, line)) {
    auto cut = line.rfind(',');
    expected[line.substr(0, cut)] = line.substr(cut + 1);
  }
  std::size_t valid = 0;
  for (auto p : kAllPresence)
    for (bool allow : {false, true})
      for (bool avail : {false, true})
        for (bool ans : {false, true}) {
          const std::string key = std::string(to_string(p)) + "," + (allow ? "true" : "false") + "," +
                                  (avail ? "true" : "false") + "," + (ans ? "true" : "false");
          if (ans && !avail) {
            bool rejected = false;
            try {
              decide_route(p, allow, avail, ans);
            } catch (const Error& e) {
              rejected = e.code() == Errc::invalid_input;
            }
            c.require(rejected, "accepted invalid row " + key);
            continue;
          }
          ++valid;
          auto it = expected.find(key);
          c.require(it != expected.end(), "golden lacks " + key);
          if (it != expected.end())
            c.require(std::string(to_string(decide_route(p, allow, avail, ans))) == it->second, "mismatch at " + key);
        }
  c.require(valid == expected.size(), "row count differs from golden");
  const double elapsed = seconds_since(t0);
  c.require(elapsed < 1.0, "took " + fixed6(elapsed) + " s");

  auto dir = scratch_dir("routes");
  c.require(shell(std::string(LLMCOMM_CLI) + " routes --table >" + (dir / "routes.csv").string()) == 0, "routes exit");
  c.require(slurp(dir / "routes.csv") == slurp(LLMCOMM_GOLDEN_DIR "/routes.csv"), "CLI routes differs from golden");
  fs::remove_all(dir);
  if (c.ok) c.detail = std::to_string(valid) + " valid rows, 8 invalid rows rejected, " + fixed6(elapsed) + " s";
  return c;
}

Check table_one() {
  Check c;
  ServiceProfile p;
  const double cold_text = service_time(p, {Stage::text}, true);
  const double cold_tts = service_time(p, {Stage::tts}, true);
  const double cold_both = service_time(p, {Stage::text, Stage::tts}, true);
  const double warm_text = service_time(p, {Stage::text}, false);
  auto exact = [](double a, double b) { return std::fabs(a - b) < 1e-9; };
  c.require(exact(cold_text, 16.26), "cold text " + fixed6(cold_text));
  c.require(exact(cold_tts, 0.44), "cold tts " + fixed6(cold_tts));
  c.require(exact(cold_both, 16.70), "cold text+tts " + fixed6(cold_both));
  c.require(exact(warm_text, 9.64), "warm text " + fixed6(warm_text));
  if (c.ok)
    c.detail = "cold text " + fixed6(cold_text) + ", cold tts " + fixed6(cold_tts) + ", cold text+tts " +
               fixed6(cold_both) + ", warm text " + fixed6(warm_text);
  return c;
}

Check training_cost() {
  Check c;
  auto small = cost::report(184'320);
  auto large = cost::report(1'720'320);
  auto within = [](double v, double ref, double rel) { return std::fabs(v - ref) <= ref * rel; };
  c.require(small.kwh == 73'728.0, "kwh " + fixed6(small.kwh));
  c.require(within(small.tco2eq, 31.22, 0.005), "tco2eq " + fixed6(small.tco2eq));
  c.require(small.usd > 180'000.0, "usd " + fixed6(small.usd));
  c.require(large.kwh == 688'128.0, "kwh " + fixed6(large.kwh));
  c.require(within(large.tco2eq, 291.42, 0.005), "tco2eq " + fixed6(large.tco2eq));
  c.require(large.usd <= 2'000'000.0, "usd " + fixed6(large.usd));
  if (c.ok)
    c.detail = "184320 GPU-h: " + cost::to_json(small) + "; 1720320 GPU-h: " + cost::to_json(large);
  return c;
}

Check three_user_replay() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  auto sc = load_scenario(scenario_path("three_user.json"));
  auto r = sim::run(sc);
  const auto& entries = r.trace.entries();

  double offload_done = -1;
  for (const auto& e : entries)
    if (e.kind == net::TraceKind::transfer_complete && e.from == "C" && e.node == "edge1" && offload_done < 0)
      offload_done = e.at;
  c.require(offload_done >= 0, "no offload to edge1 completed");

  std::map<std::uint64_t, int> logs_per_msg;
  for (const auto& rec : r.logs.by_owner("C")) logs_per_msg[rec.message_id]++;

  int a_after = 0, b_forwarded = 0, learned = 0;
  std::uint32_t version_before = 1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.kind != net::TraceKind::message) continue;
    if (e.from == "A" && e.at > offload_done) {
      ++a_after;
      std::uint64_t core = 0;
      for (const auto& ch : e.charges)
        if (ch.cls == net::LinkClass::core) core += ch.bytes;
      c.require(e.action == "LLMServe", "A message " + std::to_string(e.msg) + " not LLM-served");
      c.require(core == 0, "A exchange " + std::to_string(e.msg) + " charged " + std::to_string(core) + " core bytes");
      const std::string tail = "\n" + std::string(kDisclosureLine);
      c.require(e.response.size() > tail.size() && e.response.compare(e.response.size() - tail.size(), tail.size(), tail) == 0,
                "A response " + std::to_string(e.msg) + " lacks the disclosure line");
      c.require(logs_per_msg[e.msg] == 1, "A message " + std::to_string(e.msg) + " has " +
                                              std::to_string(logs_per_msg[e.msg]) + " log records");
    }
    if (e.from == "B") {
      ++b_forwarded;
      c.require(e.action == "ForwardToRecipient", "B message not forwarded");
      std::set<std::string> links;
      for (const auto& ch : e.charges) links.insert(ch.link);
      c.require(e.node == "edge2" && links.count("edge2-dc") && links.count("devC-dc"),
                "B message does not traverse edge2->dc->devC");
      version_before = e.version;
      bool replied = false;
      for (std::size_t k = i + 1; k < entries.size(); ++k) {
        const auto& f = entries[k];
        if (f.kind == net::TraceKind::reply && f.msg == e.msg && f.from == "C") replied = true;
        if (f.kind == net::TraceKind::learn && f.msg == e.msg) {
          c.require(replied, "learn before C's reply");
          c.require(f.version == version_before + 1, "learn did not bump the version");
          ++learned;
        }
      }
    }
  }
  const auto path = net::route_path(sc.topology, "edge2", "devC");
  c.require(path.size() == 2 && path[0].to == "dc" && path[1].to == "devC", "edge2->devC path is not via dc");
  c.require(a_after > 0, "no A exchange after offload");
  c.require(b_forwarded == 1, "expected one B message");
  c.require(learned == 1, "expected one learn");
  c.require(r.logs.size() == static_cast<std::size_t>(a_after), "log count differs from A exchanges");
  const double elapsed = seconds_since(t0);
  c.require(elapsed < 5.0, "took " + fixed6(elapsed) + " s");
  if (c.ok)
    c.detail = std::to_string(a_after) + " A exchanges at 0 core bytes, B forwarded via edge2-dc-devC, v" +
               std::to_string(version_before) + "->v" + std::to_string(version_before + 1) + ", " +
               fixed6(elapsed) + " s";
  return c;
}

Check breakeven_sweep() {
  Check c;
  auto doc = read_json_file(scenario_path("breakeven.json"));
  set_path(doc, "flows.0.max_messages", "1000");
  auto o = sim::run_with_baseline(parse_scenario(doc), false);
  c.require(o.report.messages_sent == 1000 && o.report.llm_served == 1000, "not 1000 answerable LLM-served messages");
  c.require(o.reduction.reduction_pct && *o.reduction.reduction_pct > 0.0, "exclusive reduction not positive");
  const auto per_exchange = o.baseline_report.core_bytes / o.baseline_report.messages_sent;
  c.require(per_exchange * o.baseline_report.messages_sent == o.baseline_report.core_bytes,
            "baseline core bytes not uniform per exchange");
  const std::uint64_t model_bytes = o.report.model_transfer_bytes;
  c.require(model_bytes == 13'500'000'000ULL, "model transfer bytes " + std::to_string(model_bytes));
  if (!c.ok) return c;

  const auto b = cost::breakeven_messages(model_bytes, per_exchange);
  std::vector<std::string> values;
  for (std::int64_t d = -3; d <= 3; ++d) values.push_back(std::to_string(static_cast<std::int64_t>(b) + d));
  auto dir = scratch_dir("sweep");
  runner::RunOptions opt;
  opt.include_model_transfer = true;
  auto rows = runner::exec_sweep(doc, "flows.0.max_messages", values, dir, opt);
  c.require(fs::exists(dir / "sweep.csv"), "sweep.csv missing");
  fs::remove_all(dir);

  std::optional<std::uint64_t> flip;
  bool prev_negative = false;
  for (const auto& row : rows) {
    const auto n = std::stoull(row.value);
    c.require(row.report.messages_sent == n, "sweep run " + row.value + " sent " + std::to_string(row.report.messages_sent));
    c.require(row.reduction.reduction_pct.has_value(), "undefined reduction at " + row.value);
    const bool positive = *row.reduction.reduction_pct > 0.0;
    if (positive && prev_negative && !flip) flip = n;
    prev_negative = !positive;
  }
  c.require(flip.has_value(), "inclusive reduction never changes sign in the sweep");
  if (flip) {
    const auto diff = *flip > b ? *flip - b : b - *flip;
    c.require(diff <= 1, "flip at " + std::to_string(*flip) + " vs breakeven " + std::to_string(b));
  }
  if (c.ok)
    c.detail = "exclusive reduction " + fixed6(*o.reduction.reduction_pct) + "% over 1000 messages; " +
               std::to_string(per_exchange) + " core bytes/exchange; breakeven " + std::to_string(b) +
               ", inclusive sign flips at " + std::to_string(*flip);
  return c;
}

Check determinism() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  auto dir = scratch_dir("determinism");
  const std::vector<std::string> files{"trace.jsonl", "report.json", "baseline_report.json", "reduction_report.json"};
  for (int seed = 1; seed <= 10 && c.ok; ++seed) {
    const auto scenario = scenario_path(seed % 2 ? "mixed.json" : "three_user.json");
    for (auto run : {"a", "b"}) {
      const auto out = dir / (std::to_string(seed) + run);
      c.require(shell(std::string(LLMCOMM_CLI) + " run --scenario " + scenario + " --seed " + std::to_string(seed) +
                      " --out " + out.string() + " >/dev/null") == 0,
                "run failed for seed " + std::to_string(seed));
    }
    for (const auto& f : files) {
      const auto a = slurp(dir / (std::to_string(seed) + "a") / f);
      c.require(!a.empty() && a == slurp(dir / (std::to_string(seed) + "b") / f),
                f + " differs for seed " + std::to_string(seed));
    }
  }
  fs::remove_all(dir);
  const double elapsed = seconds_since(t0);
  c.require(elapsed < 30.0, "took " + fixed6(elapsed) + " s");
  if (c.ok) c.detail = "10 seeds x 2 CLI runs byte-identical, " + fixed6(elapsed) + " s";
  return c;
}

// --- randomized invariants -------------------------------------------------

json random_scenario(std::mt19937_64& rng, std::uint64_t seed) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto unit = [&] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); };
  const std::vector<std::string> statuses{"Active", "Busy", "Away", "Inactive"};
  const std::vector<std::string> topics{"lunch", "project", "salary", "weekend"};

  const std::size_t n_edges = 1 + pick(3), n_users = 2 + pick(3);
  json nodes = json::array({{{"id", "dc"}, {"kind", "datacenter"}}});
  json links = json::array();
  for (std::size_t e = 0; e < n_edges; ++e) {
    const auto id = "edge" + std::to_string(e);
    nodes.push_back({{"id", id}, {"kind", "edge"}});
    links.push_back({{"a", id}, {"b", "dc"}, {"latency_s", 0.005 + 0.03 * unit()}, {"bandwidth_bps", 1e9},
                     {"class", "core"}});
  }
  std::vector<std::string> ids;
  json users = json::array();
  const double duration = 200 + 400 * unit();
  for (std::size_t u = 0; u < n_users; ++u) {
    const auto id = std::string(1, static_cast<char>('A' + u));
    const auto dev = "dev" + id;
    ids.push_back(id);
    nodes.push_back({{"id", dev}, {"kind", "device"}});
    const std::string attach = pick(4) == 0 ? std::string("dc") : "edge" + std::to_string(pick(n_edges));
    links.push_back({{"a", dev}, {"b", attach}, {"latency_s", 0.002 + 0.01 * unit()}, {"bandwidth_bps", 1e8},
                     {"class", "access"}});
    json user = {{"id", id}, {"attach", dev}};
    json schedule = json::array({{{"at", 0}, {"status", statuses[pick(4)]}}});
    for (std::size_t k = pick(4); k > 0; --k)
      schedule.push_back({{"at", std::floor(unit() * duration)}, {"status", statuses[pick(4)]}});
    user["status_schedule"] = schedule;
    users.push_back(user);
  }
  for (std::size_t u = 0; u < n_users; ++u) {
    json allow = json::array();
    for (const auto& other : ids)
      if (other != ids[u] && pick(3) == 0) allow.push_back(other);
    users[u]["allowlist"] = allow;
    if (pick(4) == 0) continue;
    json facts = json::object();
    for (const auto& t : topics) {
      if (pick(2)) continue;
      json vis;
      switch (pick(3)) {
        case 0: vis = "public"; break;
        case 1: vis = "private"; break;
        default: {
          json g = json::array();
          for (const auto& other : ids)
            if (other != ids[u] && pick(2)) g.push_back(other);
          vis = {{"group", g}};
        }
      }
      facts[t] = {{"response", ids[u] + " says " + t}, {"visibility", vis}};
    }
    json placements = json::array();
    for (std::size_t k = pick(3); k > 0; --k) {
      std::string node = pick(3) == 0 ? "dev" + ids[pick(n_users)] : "edge" + std::to_string(pick(n_edges));
      placements.push_back({{"node", node}, {"at", std::floor(unit() * duration / 2)}});
    }
    json model = {{"size_bytes", 1'000'000 + pick(50'000'000)}, {"facts", facts}, {"placements", placements}};
    if (pick(4) == 0) model["training"] = {{"gpu_hours", 1 + 20 * unit()}, {"from_pretrained", pick(2) == 0}};
    users[u]["model"] = model;
  }

  json flows = json::array();
  for (std::size_t k = 1 + pick(4); k > 0; --k) {
    const auto s = pick(n_users);
    auto r = pick(n_users - 1);
    if (r >= s) ++r;
    json dist = json::object();
    std::vector<std::string> chosen;
    for (const auto& t : topics)
      if (pick(2)) chosen.push_back(t);
    if (pick(2) || chosen.empty()) chosen.push_back("?");
    for (std::size_t i = 0; i < chosen.size(); ++i) dist[chosen[i]] = 1.0 / static_cast<double>(chosen.size());
    flows.push_back({{"sender", ids[s]}, {"recipient", ids[r]}, {"rate_per_s", 0.01 + 0.05 * unit()},
                     {"msg_bytes", 64 + pick(2000)}, {"topics", dist}});
  }

  static const std::vector<std::string> drains{"always-human", "delegate-if-answerable", "seeded"};
  json config = {{"propagation", pick(2) ? "immediate" : "batch"},
                 {"batch_interval_s", 50 + 200 * unit()},
                 {"drain_policy", drains[pick(3)]},
                 {"human_reply_delay_s", 1 + 60 * unit()}};
  if (pick(2)) config["stages"] = json::array({"text", "tts"});
  return {{"seed", seed},       {"duration_s", duration}, {"topology", {{"nodes", nodes}, {"links", links}}},
          {"users", users},     {"flows", flows},         {"p_answerable_unknown", unit()},
          {"config", config}};
}

// Status of `user` at time t from the schedule alone; changes at t apply
// before arrivals at t.
Presence status_at(const Scenario& sc, const UserId& user, SimTime t) {
  Presence p = sc.user(user).initial.variant();
  SimTime latest = -1;
  for (const auto& s : sc.status_schedule)
    if (s.user == user && s.at <= t && s.at >= latest) {
      latest = s.at;
      p = s.status.variant();
    }
  return p;
}

std::string check_invariants(const Scenario& sc, const sim::RunResult& r) {
  const auto report = metrics::summarize(r.trace);
  if (report.messages_sent != report.delivered_direct + report.llm_served + report.forwarded + report.held)
    return "conservation";

  std::map<std::uint64_t, int> logs;
  for (const auto& owner : sc.users)
    for (const auto& rec : r.logs.by_owner(owner.id)) {
      logs[rec.message_id]++;
      if (!has_disclosure(rec.response)) return "untagged log record";
    }
  std::size_t llm_entries = 0;
  std::map<UserId, std::uint32_t> owner_version;
  std::map<std::string, std::uint32_t> replica;  // "owner@node" -> installed version
  std::map<std::uint64_t, int> drained;
  std::set<std::uint64_t> held;
  for (const auto& u : sc.users)
    if (u.model && !u.model->training) owner_version[u.id] = replica[u.id + "@" + u.home] = 1;
  for (const auto& e : r.trace.entries()) {
    if (e.kind == net::TraceKind::message) {
      const auto st = status_at(sc, e.to, e.at);
      if (e.status != to_string(st)) return "recorded status differs from schedule";
      if (st == Presence::Inactive && (e.action != "HoldInactive" || e.logged || !e.response.empty()))
        return "model involved while Inactive";
      if (e.action == "HoldInactive") held.insert(e.msg);
      if (e.action == "LLMServe") {
        ++llm_entries;
        if (!e.logged || logs[e.msg] != 1 || !has_disclosure(e.response)) return "LLMServe without exactly one log";
      } else if (e.logged || logs.count(e.msg)) {
        if (e.action != "HoldInactive") return "log record for a non-LLM message";
      }
      if (e.version > 0 && e.version != replica[e.to + "@" + e.node]) return "replica served a version it does not hold";
    }
    if (e.kind == net::TraceKind::drain) {
      drained[e.msg]++;
      if (e.action == "DelegateToLLM") {
        ++llm_entries;
        if (logs[e.msg] != 1 || !has_disclosure(e.response)) return "delegation without exactly one log";
      }
    }
    if (e.kind == net::TraceKind::learn || e.kind == net::TraceKind::training_complete) {
      if (e.version <= owner_version[e.from]) return "owner version not strictly increasing";
      owner_version[e.from] = e.version;
      replica[e.from + "@" + e.node] = e.version;
    }
    if (e.kind == net::TraceKind::transfer_complete) {
      auto& v = replica[e.from + "@" + e.node];
      if (e.version <= v) return "replica version not strictly increasing";
      v = e.version;
    }
  }
  if (r.logs.size() != llm_entries) return "log count differs from model responses";
  for (const auto& [id, n] : drained)
    if (n != 1 || !held.count(id)) return "drain decision count";

  for (const auto& [owner, entry] : r.registry.entries()) {
    if (!r.registry.stale_replicas(owner).empty()) return "stale replica of " + owner + " at end";
    if (!entry.in_flight.empty()) return "transfer of " + owner + " still in flight at end";
  }
  return {};
}

Check randomized_invariants() {
  Check c;
  std::mt19937_64 rng(20240601);
  const int n = 10'000;
  std::uint64_t messages = 0, served = 0, held = 0, learns = 0;
  for (int i = 0; i < n && c.ok; ++i) {
    auto doc = random_scenario(rng, static_cast<std::uint64_t>(i));
    Scenario sc;
    try {
      sc = parse_scenario(doc);
    } catch (const Error& e) {
      c.require(false, "generated scenario " + std::to_string(i) + " rejected: " + e.what());
      break;
    }
    auto r = sim::run(sc);
    auto why = check_invariants(sc, r);
    c.require(why.empty(), "scenario " + std::to_string(i) + ": " + why);
    auto rep = metrics::summarize(r.trace);
    messages += rep.messages_sent;
    served += rep.llm_served;
    held += rep.held;
    for (const auto& e : r.trace.entries()) learns += e.kind == net::TraceKind::learn;
  }
  c.require(served > 0 && held > 0 && learns > 0, "generator never exercised serving, holding or learning");
  if (c.ok)
    c.detail = std::to_string(n) + " scenarios, " + std::to_string(messages) + " messages (" + std::to_string(served) +
               " LLM-served, " + std::to_string(held) + " held), " + std::to_string(learns) + " learns";
  return c;
}

Check workload_statistics() {
  Check c;
  workload::PrngState s{0};
  const auto first = workload::prng_next(s).second;
  c.require(first == 0xE220A8397B1DCDAFULL, "splitmix64(0) first output mismatch");
  s = workload::PrngState{8};
  double sum = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    auto [next, x] = workload::sample_exponential(0.5, s);
    sum += x;
    s = next;
  }
  const double mean = sum / 10'000.0;
  c.require(std::fabs(mean - 2.0) <= 0.1, "mean " + fixed6(mean));
  if (c.ok) {
    char hex[32];
    std::snprintf(hex, sizeof hex, "0x%016llX", static_cast<unsigned long long>(first));
    c.detail = "mean " + fixed6(mean) + " s at rate 0.5; splitmix64(0) = " + hex;
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"decision table equivalence", decision_table},
      {"service-time defaults", table_one},
      {"training cost, energy and carbon", training_cost},
      {"three-user edge replay", three_user_replay},
      {"traffic reduction and break-even sweep", breakeven_sweep},
      {"determinism", determinism},
      {"conservation and disclosure invariants", randomized_invariants},
      {"workload statistics", workload_statistics},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    failed += !c.ok;
    std::cout << "criterion " << i + 1 << " " << (c.ok ? "PASS" : "FAIL") << ": " << criteria[i].first << " - "
              << c.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
