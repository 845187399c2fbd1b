#pragma once

// Topology, shortest-latency routing, store-and-forward transfers, a
// deterministic event queue and the JSON-lines trace.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "llmcomm/error.hpp"
#include "llmcomm/format.hpp"
#include "llmcomm/protocol.hpp"

namespace llmcomm::net {

enum class NodeKind { device, edge, datacenter };
enum class LinkClass { access, core };

constexpr std::string_view to_string(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::device: return "device";
    case NodeKind::edge: return "edge";
    case NodeKind::datacenter: return "datacenter";
  }
  return "?";
}

constexpr std::string_view to_string(LinkClass c) noexcept {
  return c == LinkClass::access ? "access" : "core";
}

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
  for (auto k : {NodeKind::device, NodeKind::edge, NodeKind::datacenter})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::optional<LinkClass> parse_link_class(std::string_view s) {
  if (s == "access") return LinkClass::access;
  if (s == "core") return LinkClass::core;
  return std::nullopt;
}

struct Link {
  NodeId a;
  NodeId b;
  double latency_s = 0.0;
  double bandwidth_bps = 1e9;
  LinkClass cls = LinkClass::core;

  std::string name() const { return a + "-" + b; }
};

class Topology {
 public:
  void add_node(NodeId id, NodeKind kind) {
    if (!kinds_.emplace(id, kind).second) throw Error(Errc::invalid_topology, "duplicate node " + id);
    adjacency_[id];
  }

  std::size_t add_link(Link link) {
    for (const auto* end : {&link.a, &link.b})
      if (!has_node(*end)) throw Error(Errc::unknown_node, "link endpoint " + *end);
    if (link.a == link.b) throw Error(Errc::invalid_topology, "self-loop at " + link.a);
    if (!(link.latency_s >= 0.0)) throw Error(Errc::invalid_value, "link " + link.name() + ": negative latency");
    if (!(link.bandwidth_bps > 0.0))
      throw Error(Errc::invalid_value, "link " + link.name() + ": bandwidth must be positive");
    const auto idx = links_.size();
    adjacency_[link.a].push_back(idx);
    adjacency_[link.b].push_back(idx);
    links_.push_back(std::move(link));
    return idx;
  }

  bool has_node(const NodeId& id) const { return kinds_.count(id) > 0; }

  NodeKind kind(const NodeId& id) const {
    auto it = kinds_.find(id);
    if (it == kinds_.end()) throw Error(Errc::unknown_node, id);
    return it->second;
  }

  const std::map<NodeId, NodeKind>& nodes() const noexcept { return kinds_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const Link& link(std::size_t i) const { return links_.at(i); }
  const std::vector<std::size_t>& incident(const NodeId& id) const { return adjacency_.at(id); }

  const NodeId& other_end(std::size_t link_idx, const NodeId& from) const {
    const auto& l = links_.at(link_idx);
    return l.a == from ? l.b : l.a;
  }

  // The single edge (or datacenter) a device hangs off.
  const NodeId& attachment(const NodeId& device) const {
    if (kind(device) != NodeKind::device) throw Error(Errc::invalid_input, device + " is not a device");
    const auto& inc = adjacency_.at(device);
    if (inc.size() != 1) throw Error(Errc::invalid_topology, "device " + device + " must have exactly one link");
    return other_end(inc.front(), device);
  }

  // Devices attach by one access link to an edge or datacenter node; every
  // other link is core; the graph is connected.
  void validate() const {
    if (kinds_.empty()) throw Error(Errc::invalid_topology, "topology has no nodes");
    for (const auto& l : links_) {
      const bool dev_a = kind(l.a) == NodeKind::device, dev_b = kind(l.b) == NodeKind::device;
      if (dev_a && dev_b) throw Error(Errc::invalid_topology, "link " + l.name() + " joins two devices");
      if ((dev_a || dev_b) && l.cls != LinkClass::access)
        throw Error(Errc::invalid_topology, "device link " + l.name() + " must have class access");
      if (!dev_a && !dev_b && l.cls != LinkClass::core)
        throw Error(Errc::invalid_topology, "link " + l.name() + " must have class core");
    }
    for (const auto& [id, k] : kinds_)
      if (k == NodeKind::device) (void)attachment(id);

    std::set<NodeId> seen{kinds_.begin()->first};
    std::vector<NodeId> stack{kinds_.begin()->first};
    while (!stack.empty()) {
      auto n = stack.back();
      stack.pop_back();
      for (auto li : adjacency_.at(n)) {
        const auto& m = other_end(li, n);
        if (seen.insert(m).second) stack.push_back(m);
      }
    }
    for (const auto& [id, k] : kinds_)
      if (!seen.count(id)) throw Error(Errc::disconnected_topology, "node " + id + " is unreachable");
  }

 private:
  std::map<NodeId, NodeKind> kinds_;
  std::vector<Link> links_;
  std::map<NodeId, std::vector<std::size_t>> adjacency_;
};

struct Hop {
  NodeId from;
  NodeId to;
  std::size_t link = 0;
};

using Path = std::vector<Hop>;

inline double path_latency(const Topology& topo, const Path& path) {
  double s = 0.0;
  for (const auto& h : path) s += topo.link(h.link).latency_s;
  return s;
}

// Minimum total latency; ties go to fewer hops, then to the lexicographically
// smaller node sequence. Devices are endpoints only, never transit.
inline Path route_path(const Topology& topo, const NodeId& src, const NodeId& dst) {
  if (src == dst) throw Error(Errc::invalid_input, "route_path: src equals dst (" + src + ")");
  if (!topo.has_node(src)) throw Error(Errc::unknown_node, src);
  if (!topo.has_node(dst)) throw Error(Errc::unknown_node, dst);

  struct Label {
    double latency;
    std::size_t hops;
    std::vector<NodeId> nodes;
    std::vector<std::size_t> links;
    bool operator<(const Label& o) const {
      return std::tie(latency, hops, nodes) < std::tie(o.latency, o.hops, o.nodes);
    }
  };

  std::map<NodeId, Label> best;
  std::set<NodeId> done;
  best[src] = Label{0.0, 0, {src}, {}};

  while (true) {
    const Label* cur = nullptr;
    NodeId cur_id;
    for (const auto& [id, lab] : best) {
      if (done.count(id)) continue;
      if (!cur || lab < *cur) {
        cur = &lab;
        cur_id = id;
      }
    }
    if (!cur) break;
    done.insert(cur_id);
    if (cur_id == dst) break;
    if (cur_id != src && topo.kind(cur_id) == NodeKind::device) continue;

    const Label here = *cur;
    for (auto li : topo.incident(cur_id)) {
      const auto& next = topo.other_end(li, cur_id);
      if (done.count(next)) continue;
      Label cand = here;
      cand.latency += topo.link(li).latency_s;
      cand.hops += 1;
      cand.nodes.push_back(next);
      cand.links.push_back(li);
      auto it = best.find(next);
      if (it == best.end() || cand < it->second) best[next] = std::move(cand);
    }
  }

  auto it = best.find(dst);
  if (it == best.end() || !done.count(dst))
    throw Error(Errc::disconnected_topology, "no path from " + src + " to " + dst);
  Path path;
  const auto& lab = it->second;
  for (std::size_t i = 0; i < lab.links.size(); ++i) path.push_back({lab.nodes[i], lab.nodes[i + 1], lab.links[i]});
  return path;
}

// Memoizing front for route_path; topologies are immutable during a run.
class Router {
 public:
  explicit Router(const Topology& topo) : topo_(&topo) {}

  const Path& path(const NodeId& src, const NodeId& dst) {
    auto key = std::make_pair(src, dst);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(key, route_path(*topo_, src, dst)).first->second;
  }

  double latency(const NodeId& src, const NodeId& dst) {
    return src == dst ? 0.0 : path_latency(*topo_, path(src, dst));
  }

  const Topology& topology() const noexcept { return *topo_; }

 private:
  const Topology* topo_;
  std::map<std::pair<NodeId, NodeId>, Path> cache_;
};

struct LinkCharge {
  std::string link;
  LinkClass cls = LinkClass::core;
  std::uint64_t bytes = 0;
};

struct TransferResult {
  double latency_s = 0.0;
  std::vector<LinkCharge> charges;
};

// Store-and-forward: every hop pays propagation plus full serialization.
inline TransferResult transfer(const Topology& topo, const Path& path, std::uint64_t bytes) {
  if (path.empty()) throw Error(Errc::invalid_input, "transfer over an empty path");
  TransferResult r;
  for (const auto& h : path) {
    const auto& l = topo.link(h.link);
    r.latency_s += l.latency_s + 8.0 * static_cast<double>(bytes) / l.bandwidth_bps;
    if (bytes > 0) r.charges.push_back({l.name(), l.cls, bytes});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Event queue

// Pops in (at, seq) order. Pushing into the past is an error; pushes past the
// horizon are refused and reported to the caller.
template <typename Payload>
class EventQueue {
 public:
  struct Event {
    SimTime at = 0.0;
    std::uint64_t seq = 0;
    Payload payload;
  };

  explicit EventQueue(SimTime horizon = std::numeric_limits<double>::infinity()) : horizon_(horizon) {}

  // false when the event lies beyond the horizon and was dropped.
  bool push(SimTime at, Payload payload) {
    if (!(at >= now_))
      throw Error(Errc::event_in_past,
                  "event at " + fixed6(at) + " scheduled while clock is at " + fixed6(now_));
    if (at > horizon_) {
      ++dropped_;
      return false;
    }
    heap_.push(Event{at, next_seq_++, std::move(payload)});
    return true;
  }

  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }
  SimTime now() const noexcept { return now_; }
  SimTime horizon() const noexcept { return horizon_; }
  std::uint64_t dropped() const noexcept { return dropped_; }

  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    now_ = e.at;
    return e;
  }

  template <typename Handler>
  void run(Handler&& handle) {
    while (!heap_.empty()) handle(pop());
  }

 private:
  struct Later {
    bool operator()(const Event& x, const Event& y) const {
      return x.at != y.at ? x.at > y.at : x.seq > y.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  SimTime now_ = 0.0;
  SimTime horizon_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// Trace

enum class TraceKind {
  message,
  reply,
  learn,
  status_change,
  drain,
  training_complete,
  offload,
  propagate,
  transfer_complete,
  dropped,
};

constexpr std::string_view to_string(TraceKind k) noexcept {
  switch (k) {
    case TraceKind::message: return "message-arrival";
    case TraceKind::reply: return "reply";
    case TraceKind::learn: return "learn";
    case TraceKind::status_change: return "status-change";
    case TraceKind::drain: return "drain";
    case TraceKind::training_complete: return "training-complete";
    case TraceKind::offload: return "offload";
    case TraceKind::propagate: return "propagate";
    case TraceKind::transfer_complete: return "transfer-complete";
    case TraceKind::dropped: return "dropped";
  }
  return "?";
}

struct TraceEntry {
  SimTime at = 0.0;
  TraceKind kind = TraceKind::message;
  std::uint64_t msg = 0;
  UserId from;
  UserId to;
  std::string status;    // recipient status at arrival / new status
  std::string action;    // routing action or drain choice
  NodeId node;           // serving, checking or target node
  std::uint32_t version = 0;
  std::uint64_t model_bytes = 0;  // transfer-complete only
  std::vector<LinkCharge> charges;
  double network_s = 0.0;
  double service_s = 0.0;
  bool logged = false;
  std::string response;
  std::string note;

  void charge(const std::vector<LinkCharge>& more) {
    for (const auto& c : more) {
      auto it = std::find_if(charges.begin(), charges.end(), [&](const auto& x) { return x.link == c.link; });
      if (it == charges.end())
        charges.push_back(c);
      else
        it->bytes += c.bytes;
    }
  }
};

inline std::string to_jsonl(const TraceEntry& e, std::uint64_t seq) {
  std::string charges = "[";
  for (std::size_t i = 0; i < e.charges.size(); ++i) {
    if (i) charges += ',';
    charges += JsonObject{}
                   .str("link", e.charges[i].link)
                   .str("class", to_string(e.charges[i].cls))
                   .uinteger("bytes", e.charges[i].bytes)
                   .done();
  }
  charges += ']';
  return JsonObject{}
      .uinteger("seq", seq)
      .real("at", e.at)
      .str("kind", to_string(e.kind))
      .uinteger("msg", e.msg)
      .str("from", e.from)
      .str("to", e.to)
      .str("status", e.status)
      .str("action", e.action)
      .str("node", e.node)
      .uinteger("version", e.version)
      .uinteger("model_bytes", e.model_bytes)
      .raw("charges", charges)
      .real("network_s", e.network_s)
      .real("service_s", e.service_s)
      .boolean("logged", e.logged)
      .str("response", e.response)
      .str("note", e.note)
      .done();
}

class Trace {
 public:
  void append(TraceEntry e) {
    if (!entries_.empty() && e.at < entries_.back().at)
      throw Error(Errc::event_in_past, "trace entry out of order at " + fixed6(e.at));
    entries_.push_back(std::move(e));
  }

  const std::vector<TraceEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::string to_jsonl() const {
    std::string out;
    for (std::size_t i = 0; i < entries_.size(); ++i) out += net::to_jsonl(entries_[i], i) + "\n";
    return out;
  }

 private:
  std::vector<TraceEntry> entries_;
};

}  // namespace llmcomm::net
