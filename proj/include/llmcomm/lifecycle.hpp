#pragma once

// Personal-model lifecycle: training at the owner's home datacenter, replica
// placement (edge, cloud or a requester's device), and full-model
// replacement of stale replicas after the owner's model learns.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "llmcomm/costmodel.hpp"
#include "llmcomm/error.hpp"
#include "llmcomm/format.hpp"
#include "llmcomm/netsim.hpp"
#include "llmcomm/responder.hpp"

namespace llmcomm::lifecycle {

struct LifecycleConfig {
  double fine_tune_factor = 0.01;
  double training_parallelism = 1024.0;  // concurrent GPU equivalents
};

struct TrainingSpec {
  UserId owner;
  double gpu_hours = 1.0;
  bool from_pretrained = false;
  double target_ppl = 1.5;  // carried, never evaluated
  std::uint64_t result_size_bytes = 1;
};

inline void validate(const TrainingSpec& s) {
  if (!(s.gpu_hours > 0.0)) throw Error(Errc::invalid_value, "training gpu_hours must be positive");
  if (!(s.target_ppl > 0.0)) throw Error(Errc::invalid_value, "training target_ppl must be positive");
  if (s.result_size_bytes == 0) throw Error(Errc::invalid_value, "training result_size_bytes must be positive");
}

struct ReplicaState {
  std::uint32_t version = 0;
  bool warm = false;
};

struct OwnerEntry {
  NodeId home;
  std::vector<PersonalModel> versions;  // versions[v - 1]
  std::map<NodeId, ReplicaState> replicas;
  std::map<NodeId, std::uint32_t> in_flight;  // node -> version being transferred
  bool dirty = false;

  bool trained() const { return !versions.empty(); }
  const PersonalModel& latest() const { return versions.back(); }
  std::uint32_t latest_version() const { return versions.empty() ? 0 : versions.back().version; }
  const PersonalModel& at_version(std::uint32_t v) const { return versions.at(v - 1); }
};

struct Placement {
  UserId owner;
  NodeId node;
  std::uint32_t version = 0;
  std::uint64_t transfer_bytes = 0;  // 0 for a no-op
  bool noop() const { return transfer_bytes == 0; }
};

class ModelRegistry {
 public:
  void enroll(const UserId& owner, const NodeId& home) {
    auto& e = entries_[owner];
    e.home = home;
  }

  bool has(const UserId& owner) const { return entries_.count(owner) > 0; }

  const OwnerEntry& entry(const UserId& owner) const {
    auto it = entries_.find(owner);
    if (it == entries_.end()) throw Error(Errc::unknown_user, "no registry entry for " + owner);
    return it->second;
  }

  OwnerEntry& entry(const UserId& owner) {
    auto it = entries_.find(owner);
    if (it == entries_.end()) throw Error(Errc::unknown_user, "no registry entry for " + owner);
    return it->second;
  }

  const std::map<UserId, OwnerEntry>& entries() const noexcept { return entries_; }

  // Makes `model` the latest and places it, cold, at home.
  void install(PersonalModel model) {
    auto& e = entry(model.owner);
    const auto expected = e.latest_version() + 1;
    if (model.version != expected)
      throw Error(Errc::invalid_input, "model of " + model.owner + " installed as v" +
                                           std::to_string(model.version) + ", expected v" +
                                           std::to_string(expected));
    e.versions.push_back(std::move(model));
    e.replicas[e.home] = ReplicaState{e.latest_version(), false};
  }

  void complete_transfer(const UserId& owner, const NodeId& node, std::uint32_t version) {
    auto& e = entry(owner);
    auto& r = e.replicas[node];
    if (version > r.version) r = ReplicaState{version, false};
    auto it = e.in_flight.find(node);
    if (it != e.in_flight.end() && it->second <= version) e.in_flight.erase(it);
  }

  void mark_warm(const UserId& owner, const NodeId& node) { entry(owner).replicas.at(node).warm = true; }

  std::vector<NodeId> stale_replicas(const UserId& owner) const {
    const auto& e = entry(owner);
    std::vector<NodeId> out;
    for (const auto& [node, r] : e.replicas)
      if (r.version < e.latest_version()) out.push_back(node);
    return out;
  }

  std::string to_json() const {
    std::string out = "{";
    bool first = true;
    for (const auto& [owner, e] : entries_) {
      if (!first) out += ',';
      first = false;
      std::string replicas = "{";
      bool rf = true;
      for (const auto& [node, r] : e.replicas) {
        if (!rf) replicas += ',';
        rf = false;
        replicas += json_quote(node) + ":" + std::to_string(r.version);
      }
      replicas += '}';
      out += json_quote(owner) + ":" +
             JsonObject{}
                 .uinteger("version", e.latest_version())
                 .uinteger("size_bytes", e.trained() ? e.latest().size_bytes : 0)
                 .raw("replicas", replicas)
                 .done();
    }
    return out + "}";
  }

 private:
  std::map<UserId, OwnerEntry> entries_;
};

struct TrainOutcome {
  PersonalModel model;
  cost::CostReport cost;
  SimTime completion = 0.0;
};

// `content` supplies the knowledge base and profile the training run yields.
// The model is not installed until the caller reaches `completion`.
inline TrainOutcome train(const ModelRegistry& registry, const TrainingSpec& spec, PersonalModel content,
                          SimTime now, const LifecycleConfig& cfg = {}, const cost::CostParams& prices = {}) {
  validate(spec);
  if (!(cfg.training_parallelism > 0.0) || !(cfg.fine_tune_factor > 0.0))
    throw Error(Errc::invalid_value, "lifecycle parallelism and fine-tune factor must be positive");
  const double effective = spec.gpu_hours * (spec.from_pretrained ? cfg.fine_tune_factor : 1.0);
  TrainOutcome out;
  out.model = std::move(content);
  out.model.owner = spec.owner;
  out.model.size_bytes = spec.result_size_bytes;
  out.model.version = registry.has(spec.owner) ? registry.entry(spec.owner).latest_version() + 1 : 1;
  out.cost = cost::report(effective, prices);
  out.completion = now + effective / cfg.training_parallelism * 3600.0;
  return out;
}

inline Placement offload(ModelRegistry& registry, const net::Topology& topo, const UserId& owner,
                         const NodeId& node) {
  if (!topo.has_node(node)) throw Error(Errc::unknown_node, node);
  if (!registry.has(owner)) throw Error(Errc::unknown_user, owner);
  auto& e = registry.entry(owner);
  if (!e.trained()) throw Error(Errc::invalid_input, owner + " has no trained model to offload");

  const auto latest = e.latest_version();
  auto r = e.replicas.find(node);
  const bool current = r != e.replicas.end() && r->second.version == latest;
  auto f = e.in_flight.find(node);
  const bool arriving = f != e.in_flight.end() && f->second == latest;
  if (current || arriving) return Placement{owner, node, latest, 0};

  e.in_flight[node] = latest;
  return Placement{owner, node, latest, e.latest().size_bytes};
}

// One full-model transfer per stale replica that is not already receiving
// the latest version. Nodes still receiving an older version count as stale.
inline std::vector<Placement> propagate(ModelRegistry& registry, const net::Topology& topo, const UserId& owner) {
  std::set<NodeId> targets;
  for (const auto& node : registry.stale_replicas(owner)) targets.insert(node);
  const auto& e = registry.entry(owner);
  for (const auto& [node, version] : e.in_flight)
    if (version < e.latest_version()) targets.insert(node);
  std::vector<Placement> out;
  for (const auto& node : targets) {
    auto p = offload(registry, topo, owner, node);
    if (!p.noop()) out.push_back(p);
  }
  registry.entry(owner).dirty = false;
  return out;
}

// Nearest completed replica by path latency, ties to the smaller node id.
// Device replicas serve only their own device.
inline std::optional<NodeId> resolve_replica(const ModelRegistry& registry, const UserId& owner,
                                             const NodeId& origin, net::Router& router) {
  if (!registry.has(owner)) return std::nullopt;
  const auto& e = registry.entry(owner);
  std::optional<NodeId> best;
  double best_latency = std::numeric_limits<double>::infinity();
  const auto& topo = router.topology();
  for (const auto& [node, r] : e.replicas) {
    if (r.version == 0) continue;
    if (node != origin && topo.kind(node) == net::NodeKind::device) continue;
    const double lat = router.latency(origin, node);
    if (lat < best_latency) {  // map order already gives the lexicographic tie-break
      best_latency = lat;
      best = node;
    }
  }
  return best;
}

}  // namespace llmcomm::lifecycle
