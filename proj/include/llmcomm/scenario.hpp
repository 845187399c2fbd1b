#pragma once

// Scenario documents: one JSON object with seed, duration_s, topology, users,
// flows and optional config / p_answerable_unknown. Unknown keys are errors.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmcomm/costmodel.hpp"
#include "llmcomm/error.hpp"
#include "llmcomm/lifecycle.hpp"
#include "llmcomm/netsim.hpp"
#include "llmcomm/protocol.hpp"
#include "llmcomm/responder.hpp"
#include "llmcomm/workload.hpp"

namespace llmcomm {

struct PlacementSpec {
  NodeId node;
  SimTime at = 0.0;
};

struct ModelSpec {
  std::uint64_t size_bytes = 1;
  std::map<std::string, Fact> facts;
  ServiceProfile profile;
  std::vector<PlacementSpec> placements;
  std::optional<lifecycle::TrainingSpec> training;
};

struct UserSpec {
  UserId id;
  NodeId device;
  NodeId home;
  std::set<UserId> allowlist;
  PresenceStatus initial;  // from schedule entries at t = 0
  std::optional<ModelSpec> model;
};

enum class PropagationMode { immediate, batch };

struct SimConfig {
  std::uint64_t status_bytes = 64;
  PropagationMode propagation = PropagationMode::batch;
  double batch_interval_s = 3600.0;
  lifecycle::LifecycleConfig lifecycle;
  DrainPolicy drain;
  Stages stages{Stage::text};
  double human_reply_delay_s = 30.0;
  double horizon_s = std::numeric_limits<double>::infinity();
  cost::CostParams cost;
};

struct Scenario {
  std::uint64_t seed = 0;
  double duration_s = 1.0;
  net::Topology topology;
  std::vector<UserSpec> users;
  std::vector<workload::Flow> flows;
  std::vector<workload::StatusChange> status_schedule;  // t > 0 only
  double p_answerable_unknown = 0.0;
  SimConfig config;

  const UserSpec& user(const UserId& id) const {
    for (const auto& u : users)
      if (u.id == id) return u;
    throw Error(Errc::unknown_user, id);
  }

  workload::ScenarioParams workload_params() const {
    workload::ScenarioParams p;
    p.seed = seed;
    p.duration_s = duration_s;
    p.flows = flows;
    p.status_schedule = status_schedule;
    p.p_answerable_unknown = p_answerable_unknown;
    for (const auto& u : users) {
      if (!u.model) continue;
      auto& pool = p.recipient_topics[u.id];
      for (const auto& [topic, _] : u.model->facts) pool.push_back(topic);
    }
    return p;
  }
};

namespace detail {

using nlohmann::json;

inline void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(Errc::invalid_value, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(Errc::unknown_key, (where.empty() ? "" : where + ".") + key);
  }
}

inline std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

inline const json& need(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw Error(Errc::missing_key, join(where, key));
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw Error(Errc::invalid_value, path + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(Errc::invalid_value, path + " must be finite");
  return d;
}

inline std::uint64_t count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw Error(Errc::invalid_value, path + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw Error(Errc::invalid_value, path + " must be a string");
  return v.get<std::string>();
}

inline bool flag(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw Error(Errc::invalid_value, path + " must be a boolean");
  return v.get<bool>();
}

inline const json& array(const json& v, const std::string& path) {
  if (!v.is_array()) throw Error(Errc::invalid_value, path + " must be an array");
  return v;
}

inline std::string at(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

inline net::Topology parse_topology(const json& j) {
  const std::string where = "topology";
  only_keys(j, where, {"nodes", "links"});
  net::Topology topo;
  const auto& nodes = array(need(j, where, "nodes"), where + ".nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto w = at(where + ".nodes", i);
    only_keys(nodes[i], w, {"id", "kind"});
    const auto id = text(need(nodes[i], w, "id"), w + ".id");
    const auto kind_s = text(need(nodes[i], w, "kind"), w + ".kind");
    auto kind = net::parse_node_kind(kind_s);
    if (!kind) throw Error(Errc::invalid_value, w + ".kind '" + kind_s + "' is not device|edge|datacenter");
    topo.add_node(id, *kind);
  }
  if (j.contains("links")) {
    const auto& links = array(j.at("links"), where + ".links");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto w = at(where + ".links", i);
      only_keys(links[i], w, {"a", "b", "latency_s", "bandwidth_bps", "class"});
      net::Link l;
      l.a = text(need(links[i], w, "a"), w + ".a");
      l.b = text(need(links[i], w, "b"), w + ".b");
      l.latency_s = number(need(links[i], w, "latency_s"), w + ".latency_s");
      l.bandwidth_bps = number(need(links[i], w, "bandwidth_bps"), w + ".bandwidth_bps");
      const auto cls_s = text(need(links[i], w, "class"), w + ".class");
      auto cls = net::parse_link_class(cls_s);
      if (!cls) throw Error(Errc::invalid_value, w + ".class '" + cls_s + "' is not access|core");
      l.cls = *cls;
      topo.add_link(std::move(l));
    }
  }
  topo.validate();
  return topo;
}

inline Visibility parse_visibility(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "public") return Public{};
    if (s == "private") return Private{};
    throw Error(Errc::invalid_value, path + " must be \"public\", \"private\" or {\"group\": [...]}");
  }
  only_keys(v, path, {"group"});
  Group g;
  const auto& members = array(need(v, path, "group"), path + ".group");
  for (std::size_t i = 0; i < members.size(); ++i) g.members.insert(text(members[i], at(path + ".group", i)));
  return g;
}

inline ServiceProfile parse_profile(const json& j, const std::string& where) {
  only_keys(j, where, {"load_time_s", "process_time_s", "tts_load_s", "tts_process_s"});
  ServiceProfile p;
  if (j.contains("load_time_s")) p.load_time_s = number(j.at("load_time_s"), where + ".load_time_s");
  if (j.contains("process_time_s")) p.process_time_s = number(j.at("process_time_s"), where + ".process_time_s");
  if (j.contains("tts_load_s")) p.tts_load_s = number(j.at("tts_load_s"), where + ".tts_load_s");
  if (j.contains("tts_process_s")) p.tts_process_s = number(j.at("tts_process_s"), where + ".tts_process_s");
  try {
    validate(p);
  } catch (const Error&) {
    throw Error(Errc::invalid_value, where + ": service times must be non-negative");
  }
  return p;
}

inline ModelSpec parse_model(const json& j, const std::string& where, const UserId& owner) {
  only_keys(j, where, {"size_bytes", "facts", "profile", "placements", "training"});
  ModelSpec m;
  m.size_bytes = count(need(j, where, "size_bytes"), where + ".size_bytes");
  if (m.size_bytes == 0) throw Error(Errc::invalid_value, where + ".size_bytes must be positive");
  if (j.contains("facts")) {
    const auto& facts = j.at("facts");
    if (!facts.is_object()) throw Error(Errc::invalid_value, where + ".facts must be an object");
    for (const auto& [topic, f] : facts.items()) {
      const auto w = where + ".facts." + topic;
      only_keys(f, w, {"response", "visibility"});
      Fact fact;
      fact.response_template = text(need(f, w, "response"), w + ".response");
      if (fact.response_template.empty()) throw Error(Errc::invalid_value, w + ".response must be non-empty");
      if (f.contains("visibility")) fact.visibility = parse_visibility(f.at("visibility"), w + ".visibility");
      m.facts.emplace(topic, std::move(fact));
    }
  }
  if (j.contains("profile")) m.profile = parse_profile(j.at("profile"), where + ".profile");
  if (j.contains("placements")) {
    const auto& pl = array(j.at("placements"), where + ".placements");
    for (std::size_t i = 0; i < pl.size(); ++i) {
      const auto w = at(where + ".placements", i);
      only_keys(pl[i], w, {"node", "at"});
      PlacementSpec p;
      p.node = text(need(pl[i], w, "node"), w + ".node");
      if (pl[i].contains("at")) p.at = number(pl[i].at("at"), w + ".at");
      if (!(p.at >= 0.0)) throw Error(Errc::invalid_value, w + ".at must be non-negative");
      m.placements.push_back(std::move(p));
    }
  }
  if (j.contains("training")) {
    const auto w = where + ".training";
    const auto& t = j.at("training");
    only_keys(t, w, {"gpu_hours", "from_pretrained", "target_ppl"});
    lifecycle::TrainingSpec spec;
    spec.owner = owner;
    spec.gpu_hours = number(need(t, w, "gpu_hours"), w + ".gpu_hours");
    if (t.contains("from_pretrained")) spec.from_pretrained = flag(t.at("from_pretrained"), w + ".from_pretrained");
    if (t.contains("target_ppl")) spec.target_ppl = number(t.at("target_ppl"), w + ".target_ppl");
    spec.result_size_bytes = m.size_bytes;
    try {
      lifecycle::validate(spec);
    } catch (const Error& e) {
      throw Error(Errc::invalid_value, w + ": " + e.what());
    }
    m.training = spec;
  }
  return m;
}

inline SimConfig parse_config(const json& j) {
  const std::string where = "config";
  only_keys(j, where,
            {"status_bytes", "propagation", "batch_interval_s", "training_parallelism", "fine_tune_factor",
             "drain_policy", "delegate_probability", "stages", "human_reply_delay_s", "horizon_s", "cost"});
  SimConfig c;
  auto positive = [](double v, const std::string& path) {
    if (!(v > 0.0)) throw Error(Errc::invalid_value, path + " must be positive");
    return v;
  };
  if (j.contains("status_bytes")) c.status_bytes = count(j.at("status_bytes"), where + ".status_bytes");
  if (j.contains("propagation")) {
    const auto s = text(j.at("propagation"), where + ".propagation");
    if (s == "immediate")
      c.propagation = PropagationMode::immediate;
    else if (s == "batch")
      c.propagation = PropagationMode::batch;
    else
      throw Error(Errc::invalid_value, where + ".propagation must be \"immediate\" or \"batch\"");
  }
  if (j.contains("batch_interval_s"))
    c.batch_interval_s = positive(number(j.at("batch_interval_s"), where + ".batch_interval_s"), where + ".batch_interval_s");
  if (j.contains("training_parallelism"))
    c.lifecycle.training_parallelism = positive(number(j.at("training_parallelism"), where + ".training_parallelism"),
                                                where + ".training_parallelism");
  if (j.contains("fine_tune_factor"))
    c.lifecycle.fine_tune_factor =
        positive(number(j.at("fine_tune_factor"), where + ".fine_tune_factor"), where + ".fine_tune_factor");
  if (j.contains("drain_policy")) {
    const auto s = text(j.at("drain_policy"), where + ".drain_policy");
    auto k = parse_drain_policy(s);
    if (!k) throw Error(Errc::invalid_value, where + ".drain_policy '" + s + "' is unknown");
    c.drain.kind = *k;
  }
  if (j.contains("delegate_probability")) {
    c.drain.delegate_probability = number(j.at("delegate_probability"), where + ".delegate_probability");
    if (!(c.drain.delegate_probability >= 0.0 && c.drain.delegate_probability <= 1.0))
      throw Error(Errc::invalid_probability, where + ".delegate_probability must lie in [0,1]");
  }
  if (j.contains("stages")) {
    const auto& st = array(j.at("stages"), where + ".stages");
    if (st.empty()) throw Error(Errc::invalid_value, where + ".stages must not be empty");
    c.stages = Stages{};
    for (std::size_t i = 0; i < st.size(); ++i) {
      const auto s = text(st[i], at(where + ".stages", i));
      if (s == "text")
        c.stages.add(Stage::text);
      else if (s == "tts")
        c.stages.add(Stage::tts);
      else
        throw Error(Errc::invalid_value, at(where + ".stages", i) + " must be \"text\" or \"tts\"");
    }
  }
  if (j.contains("human_reply_delay_s")) {
    c.human_reply_delay_s = number(j.at("human_reply_delay_s"), where + ".human_reply_delay_s");
    if (!(c.human_reply_delay_s >= 0.0)) throw Error(Errc::invalid_value, where + ".human_reply_delay_s must be non-negative");
  }
  if (j.contains("horizon_s")) c.horizon_s = positive(number(j.at("horizon_s"), where + ".horizon_s"), where + ".horizon_s");
  if (j.contains("cost")) {
    const auto w = where + ".cost";
    const auto& cj = j.at("cost");
    only_keys(cj, w, {"price_usd_per_gpu_hour", "tdp_kw", "carbon_kg_per_kwh"});
    if (cj.contains("price_usd_per_gpu_hour"))
      c.cost.price_usd_per_gpu_hour = positive(number(cj.at("price_usd_per_gpu_hour"), w), w + ".price_usd_per_gpu_hour");
    if (cj.contains("tdp_kw")) c.cost.tdp_kw = positive(number(cj.at("tdp_kw"), w), w + ".tdp_kw");
    if (cj.contains("carbon_kg_per_kwh"))
      c.cost.carbon_kg_per_kwh = positive(number(cj.at("carbon_kg_per_kwh"), w), w + ".carbon_kg_per_kwh");
  }
  return c;
}

}  // namespace detail

// Parses and fully validates; the first problem found is thrown with the
// offending key path in the message.
inline Scenario parse_scenario(const nlohmann::json& doc) {
  using namespace detail;
  only_keys(doc, "", {"seed", "duration_s", "topology", "users", "flows", "config", "p_answerable_unknown"});

  Scenario sc;
  sc.seed = count(need(doc, "", "seed"), "seed");
  sc.duration_s = number(need(doc, "", "duration_s"), "duration_s");
  if (!(sc.duration_s > 0.0)) throw Error(Errc::invalid_value, "duration_s must be positive");
  sc.topology = parse_topology(need(doc, "", "topology"));
  if (doc.contains("config")) sc.config = parse_config(doc.at("config"));
  if (doc.contains("p_answerable_unknown")) {
    sc.p_answerable_unknown = number(doc.at("p_answerable_unknown"), "p_answerable_unknown");
    if (!(sc.p_answerable_unknown >= 0.0 && sc.p_answerable_unknown <= 1.0))
      throw Error(Errc::invalid_probability, "p_answerable_unknown must lie in [0,1]");
  }

  NodeId default_home;
  for (const auto& [id, kind] : sc.topology.nodes())
    if (kind == net::NodeKind::datacenter) {
      default_home = id;
      break;
    }

  const auto& users = array(need(doc, "", "users"), "users");
  std::set<UserId> ids;
  std::set<NodeId> devices_taken;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto w = at("users", i);
    only_keys(users[i], w, {"id", "attach", "home", "status_schedule", "allowlist", "model"});
    UserSpec u;
    u.id = text(need(users[i], w, "id"), w + ".id");
    if (!ids.insert(u.id).second) throw Error(Errc::invalid_value, w + ".id '" + u.id + "' is duplicated");
    u.device = text(need(users[i], w, "attach"), w + ".attach");
    if (!sc.topology.has_node(u.device)) throw Error(Errc::unknown_node, w + ".attach '" + u.device + "'");
    if (sc.topology.kind(u.device) != net::NodeKind::device)
      throw Error(Errc::invalid_value, w + ".attach '" + u.device + "' is not a device node");
    if (!devices_taken.insert(u.device).second)
      throw Error(Errc::invalid_value, w + ".attach '" + u.device + "' is shared with another user");

    u.home = users[i].contains("home") ? text(users[i].at("home"), w + ".home") : default_home;
    if (u.home.empty()) throw Error(Errc::invalid_topology, w + ": topology has no datacenter to act as home");
    if (!sc.topology.has_node(u.home)) throw Error(Errc::unknown_node, w + ".home '" + u.home + "'");
    if (sc.topology.kind(u.home) == net::NodeKind::device)
      throw Error(Errc::invalid_value, w + ".home '" + u.home + "' must not be a device");

    if (users[i].contains("allowlist")) {
      const auto& al = array(users[i].at("allowlist"), w + ".allowlist");
      for (std::size_t k = 0; k < al.size(); ++k) u.allowlist.insert(text(al[k], at(w + ".allowlist", k)));
    }

    auto make_status = [&](Presence p) {
      return p == Presence::Busy ? PresenceStatus::busy(u.allowlist) : PresenceStatus(p);
    };
    if (users[i].contains("status_schedule")) {
      const auto& ss = array(users[i].at("status_schedule"), w + ".status_schedule");
      for (std::size_t k = 0; k < ss.size(); ++k) {
        const auto ws = at(w + ".status_schedule", k);
        only_keys(ss[k], ws, {"at", "status"});
        const double t = number(need(ss[k], ws, "at"), ws + ".at");
        if (!(t >= 0.0)) throw Error(Errc::invalid_value, ws + ".at must be non-negative");
        const auto s = text(need(ss[k], ws, "status"), ws + ".status");
        auto p = parse_presence(s);
        if (!p) throw Error(Errc::invalid_value, ws + ".status '" + s + "' is not Active|Busy|Away|Inactive");
        if (t == 0.0)
          u.initial = make_status(*p);
        else
          sc.status_schedule.push_back({u.id, t, make_status(*p)});
      }
    }
    if (users[i].contains("model")) u.model = parse_model(users[i].at("model"), w + ".model", u.id);
    sc.users.push_back(std::move(u));
  }

  for (std::size_t i = 0; i < sc.users.size(); ++i) {
    const auto& u = sc.users[i];
    for (const auto& a : u.allowlist)
      if (!ids.count(a)) throw Error(Errc::unknown_user, at("users", i) + ".allowlist '" + a + "'");
    if (!u.model) continue;
    for (std::size_t k = 0; k < u.model->placements.size(); ++k)
      if (!sc.topology.has_node(u.model->placements[k].node))
        throw Error(Errc::unknown_node,
                    at(at("users", i) + ".model.placements", k) + ".node '" + u.model->placements[k].node + "'");
    for (const auto& [topic, fact] : u.model->facts)
      if (const auto* g = std::get_if<Group>(&fact.visibility))
        for (const auto& m : g->members)
          if (!ids.count(m))
            throw Error(Errc::unknown_user, at("users", i) + ".model.facts." + topic + ".visibility.group '" + m + "'");
  }

  const auto& flows = array(need(doc, "", "flows"), "flows");
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const auto w = at("flows", i);
    only_keys(flows[i], w,
              {"sender", "recipient", "rate_per_s", "msg_bytes", "reply_bytes", "topics", "start_s", "max_messages"});
    workload::Flow f;
    f.sender = text(need(flows[i], w, "sender"), w + ".sender");
    f.recipient = text(need(flows[i], w, "recipient"), w + ".recipient");
    for (const auto* who : {&f.sender, &f.recipient})
      if (!ids.count(*who)) throw Error(Errc::unknown_user, w + ": user '" + *who + "'");
    f.rate_per_s = number(need(flows[i], w, "rate_per_s"), w + ".rate_per_s");
    f.msg_bytes = count(need(flows[i], w, "msg_bytes"), w + ".msg_bytes");
    if (flows[i].contains("reply_bytes")) f.reply_bytes = count(flows[i].at("reply_bytes"), w + ".reply_bytes");
    if (flows[i].contains("start_s")) f.start_s = number(flows[i].at("start_s"), w + ".start_s");
    if (flows[i].contains("max_messages")) f.max_messages = count(flows[i].at("max_messages"), w + ".max_messages");
    const auto& topics = need(flows[i], w, "topics");
    if (!topics.is_object()) throw Error(Errc::invalid_value, w + ".topics must be an object");
    for (const auto& [topic, prob] : topics.items()) f.topics[topic] = number(prob, w + ".topics." + topic);
    sc.flows.push_back(std::move(f));
  }

  workload::validate(sc.workload_params());
  return sc;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse_error, path + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_json_file(path)); }

// Sets a dotted path ("flows.0.max_messages") inside a scenario document.
// Numeric and boolean literals are stored as such, anything else as a string.
inline void set_path(nlohmann::json& doc, const std::string& dotted, const std::string& raw_value) {
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw_value);
    if (!(value.is_number() || value.is_boolean())) value = raw_value;
  } catch (const nlohmann::json::parse_error&) {
    value = raw_value;
  }
  nlohmann::json* cur = &doc;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw Error(Errc::invalid_input, "empty sweep key");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    const bool last = i + 1 == parts.size();
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (const std::exception&) {
        throw Error(Errc::invalid_input, "sweep key '" + dotted + "': '" + p + "' is not an array index");
      }
      if (idx >= cur->size()) throw Error(Errc::invalid_input, "sweep key '" + dotted + "': index " + p + " out of range");
      cur = &(*cur)[idx];
    } else if (cur->is_object() || cur->is_null()) {
      cur = &(*cur)[p];
    } else {
      throw Error(Errc::invalid_input, "sweep key '" + dotted + "' descends into a scalar at '" + p + "'");
    }
    if (last) *cur = value;
  }
}

}  // namespace llmcomm
