#pragma once

// Single-threaded discrete-event run of a scenario. A run owns all of its
// state; parallel runs share nothing.
//
// Message path by routing action:
//   DeliverDirect       sender device -> recipient device, human reply later
//   LLMServe            sender device -> replica -> sender device
//   ForwardToRecipient  sender device [-> checking replica] -> recipient device,
//                       human reply later, model learns from it
//   HoldInactive        sender device -> recipient home mailbox, drained on Active
//
// The baseline mode replays the same workload with every user Active, no
// models and no learning.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "llmcomm/costmodel.hpp"
#include "llmcomm/lifecycle.hpp"
#include "llmcomm/metrics.hpp"
#include "llmcomm/netsim.hpp"
#include "llmcomm/protocol.hpp"
#include "llmcomm/responder.hpp"
#include "llmcomm/scenario.hpp"
#include "llmcomm/workload.hpp"

namespace llmcomm::sim {

enum class Mode { scenario, baseline };

struct RunResult {
  net::Trace trace;
  InteractionLog logs;
  lifecycle::ModelRegistry registry;
  std::uint64_t dropped_events = 0;
};

inline std::string reply_text(const UserId& owner, const std::string& topic) {
  return owner + " on " + topic + ": here is the answer";
}

class Engine {
 public:
  Engine(const Scenario& sc, Mode mode) : sc_(sc), mode_(mode), router_(sc.topology), queue_(sc.config.horizon_s) {}

  RunResult run() {
    init();
    queue_.run([this](const auto& ev) {
      std::visit([&](const auto& payload) { handle(ev.at, payload); }, ev.payload);
    });
    RunResult out;
    out.trace = std::move(trace_);
    out.logs = std::move(logs_);
    out.registry = std::move(registry_);
    out.dropped_events = queue_.dropped();
    return out;
  }

 private:
  struct Arrival {
    Message message;
    std::uint64_t reply_bytes;
  };
  struct StatusEvent {
    UserId user;
    PresenceStatus status;
  };
  struct TrainingDone {
    lifecycle::TrainOutcome outcome;
  };
  struct PlaceRequest {
    UserId owner;
    NodeId node;
  };
  struct TransferDone {
    lifecycle::Placement placement;
    std::vector<net::LinkCharge> charges;
  };
  struct HumanReply {
    Message original;
    std::uint64_t reply_bytes;
    bool learn;
  };
  struct PropagationTick {};

  using Payload = std::variant<Arrival, StatusEvent, TrainingDone, PlaceRequest, TransferDone, HumanReply, PropagationTick>;

  struct UserState {
    PresenceStatus status;
    Inbox inbox;
  };

  static const char* describe(const Payload& p) {
    static constexpr const char* names[] = {"message-arrival", "status-change", "training-complete", "offload",
                                            "transfer-complete", "reply", "propagate"};
    return names[p.index()];
  }

  void schedule(SimTime at, Payload p) {
    const char* what = describe(p);
    if (!queue_.push(at, std::move(p))) {
      net::TraceEntry e;
      e.at = queue_.now();
      e.kind = net::TraceKind::dropped;
      e.note = std::string(what) + " at " + fixed6(at) + " beyond horizon";
      trace_.append(std::move(e));
    }
  }

  const UserSpec& user(const UserId& id) const { return sc_.user(id); }

  net::TransferResult send(const NodeId& src, const NodeId& dst, std::uint64_t bytes) {
    if (src == dst) return {};
    return net::transfer(sc_.topology, router_.path(src, dst), bytes);
  }

  void init() {
    const bool live = mode_ == Mode::scenario;
    for (const auto& u : sc_.users) {
      users_[u.id] = UserState{live ? u.initial : PresenceStatus(Presence::Active), Inbox(u.id)};
      registry_.enroll(u.id, u.home);
      if (!live || !u.model) continue;
      PersonalModel content{u.id, 1, u.model->size_bytes, u.model->facts, u.model->profile};
      if (u.model->training) {
        auto outcome = lifecycle::train(registry_, *u.model->training, std::move(content), 0.0,
                                        sc_.config.lifecycle, sc_.config.cost);
        const auto when = outcome.completion;
        schedule(when, TrainingDone{std::move(outcome)});
      } else {
        registry_.install(std::move(content));
      }
      for (const auto& p : u.model->placements) schedule(p.at, PlaceRequest{u.id, p.node});
    }

    for (auto& ev : workload::generate(sc_.workload_params())) {
      if (ev.kind == workload::GeneratedEvent::Kind::message) {
        schedule(ev.at, Arrival{std::move(ev.message), ev.reply_bytes});
      } else if (live) {
        schedule(ev.at, StatusEvent{ev.status.user, ev.status.status});
      }
    }
  }

  // --- messages -------------------------------------------------------------

  void handle(SimTime t, const Arrival& a) {
    const Message& m = a.message;
    validate(m);
    auto& rs = users_.at(m.recipient);
    const auto& sender_dev = user(m.sender).device;
    const auto& recipient = user(m.recipient);

    net::TraceEntry e;
    e.at = t;
    e.kind = net::TraceKind::message;
    e.msg = m.id;
    e.from = m.sender;
    e.to = m.recipient;
    e.status = std::string(to_string(rs.status.variant()));

    // Presence is mirrored at every edge; the check costs one control
    // message to the sender's access node.
    auto lookup = send(sender_dev, sc_.topology.attachment(sender_dev), sc_.config.status_bytes);
    e.charge(lookup.charges);
    double network = lookup.latency_s;

    const bool allowlisted = rs.status.allows(m.sender);
    const auto variant = rs.status.variant();
    std::optional<NodeId> replica;
    std::uint32_t version = 0;
    bool answerable = false;
    if (mode_ == Mode::scenario &&
        (variant == Presence::Away || (variant == Presence::Busy && !allowlisted))) {
      replica = lifecycle::resolve_replica(registry_, m.recipient, sender_dev, router_);
      if (replica) {
        const auto& entry = registry_.entry(m.recipient);
        version = entry.replicas.at(*replica).version;
        answerable = llmcomm::answerable(entry.at_version(version), m.topic, m.sender);
      }
    }
    const auto action = mode_ == Mode::baseline
                            ? RoutingAction::DeliverDirect
                            : decide_route(variant, allowlisted, replica.has_value(), answerable);
    e.action = std::string(to_string(action));

    switch (action) {
      case RoutingAction::DeliverDirect: {
        auto tr = send(sender_dev, recipient.device, m.size_bytes);
        e.charge(tr.charges);
        network += tr.latency_s;
        schedule(t + network + sc_.config.human_reply_delay_s, HumanReply{m, a.reply_bytes, false});
        break;
      }
      case RoutingAction::LLMServe: {
        const auto& node = *replica;
        auto& entry = registry_.entry(m.recipient);
        const bool cold = !entry.replicas.at(node).warm;
        auto request = send(sender_dev, node, m.size_bytes);
        auto response = generate(entry.at_version(version), m, sc_.config.stages, cold);
        auto back = send(node, sender_dev, a.reply_bytes);
        registry_.mark_warm(m.recipient, node);
        e.charge(request.charges);
        e.charge(back.charges);
        network += request.latency_s + back.latency_s;
        e.node = node;
        e.version = response.model_version;
        e.service_s = response.service_time_s;
        e.response = response.body;
        e.logged = true;
        logs_.record({t + lookup.latency_s + request.latency_s + response.service_time_s, m.recipient, m.sender,
                      m.body, response.body, response.model_version, variant, node, m.id});
        break;
      }
      case RoutingAction::ForwardToRecipient: {
        if (replica) {
          auto to_check = send(sender_dev, *replica, m.size_bytes);
          auto onward = send(*replica, recipient.device, m.size_bytes);
          e.charge(to_check.charges);
          e.charge(onward.charges);
          network += to_check.latency_s + onward.latency_s;
          e.node = *replica;
          e.version = version;
        } else {
          auto tr = send(sender_dev, recipient.device, m.size_bytes);
          e.charge(tr.charges);
          network += tr.latency_s;
        }
        schedule(t + network + sc_.config.human_reply_delay_s, HumanReply{m, a.reply_bytes, true});
        break;
      }
      case RoutingAction::HoldInactive: {
        auto tr = send(sender_dev, recipient.home, m.size_bytes);
        e.charge(tr.charges);
        network += tr.latency_s;
        e.node = recipient.home;
        rs.inbox.hold(m, HoldReason::inactive_hold);
        held_reply_bytes_[m.id] = a.reply_bytes;
        break;
      }
    }
    e.network_s = network;
    trace_.append(std::move(e));
  }

  // --- presence -------------------------------------------------------------

  void handle(SimTime t, const StatusEvent& s) {
    const auto& u = user(s.user);
    auto& us = users_.at(s.user);
    us.status = s.status;

    net::TraceEntry e;
    e.at = t;
    e.kind = net::TraceKind::status_change;
    e.from = s.user;
    e.status = std::string(to_string(s.status.variant()));
    e.node = u.home;
    auto up = send(u.device, u.home, sc_.config.status_bytes);
    e.charge(up.charges);
    e.network_s = up.latency_s;
    for (const auto& [node, kind] : sc_.topology.nodes()) {
      if (kind == net::NodeKind::device || node == u.home) continue;
      e.charge(send(u.home, node, sc_.config.status_bytes).charges);
    }
    trace_.append(std::move(e));

    auto policy = sc_.config.drain;
    policy.seed = sc_.seed;
    auto can_answer = [&](const Message& m) {
      const auto& entry = registry_.entry(s.user);
      return entry.trained() && llmcomm::answerable(entry.latest(), m.topic, m.sender);
    };
    for (auto& d : on_status_change(s.user, s.status, us.inbox, policy, can_answer, t)) drain(t, u, d);
  }

  void drain(SimTime t, const UserSpec& owner, const DrainDecision& d) {
    const Message& m = d.message;
    const auto reply_bytes = held_reply_bytes_.at(m.id);
    held_reply_bytes_.erase(m.id);

    net::TraceEntry e;
    e.at = t;
    e.kind = net::TraceKind::drain;
    e.msg = m.id;
    e.from = m.sender;
    e.to = owner.id;
    e.status = "Active";
    e.action = std::string(to_string(d.choice));
    e.node = owner.home;
    e.note = std::string(to_string(d.reason));

    if (d.choice == DrainChoice::HumanReply) {
      auto tr = send(owner.home, owner.device, m.size_bytes);
      e.charge(tr.charges);
      e.network_s = tr.latency_s;
      schedule(t + tr.latency_s + sc_.config.human_reply_delay_s, HumanReply{m, reply_bytes, true});
    } else {
      auto& entry = registry_.entry(owner.id);
      const bool cold = !entry.replicas.at(owner.home).warm;
      auto response = generate(entry.latest(), m, sc_.config.stages, cold);
      auto back = send(owner.home, user(m.sender).device, reply_bytes);
      registry_.mark_warm(owner.id, owner.home);
      e.charge(back.charges);
      e.network_s = back.latency_s;
      e.service_s = response.service_time_s;
      e.version = response.model_version;
      e.response = response.body;
      e.logged = true;
      logs_.record({t + response.service_time_s, owner.id, m.sender, m.body, response.body,
                    response.model_version, Presence::Active, owner.home, m.id});
    }
    trace_.append(std::move(e));
  }

  // --- human replies and learning -------------------------------------------

  void handle(SimTime t, const HumanReply& r) {
    const auto& m = r.original;
    auto tr = send(user(m.recipient).device, user(m.sender).device, r.reply_bytes);
    net::TraceEntry e;
    e.at = t;
    e.kind = net::TraceKind::reply;
    e.msg = m.id;
    e.from = m.recipient;
    e.to = m.sender;
    e.charge(tr.charges);
    e.network_s = tr.latency_s;
    trace_.append(std::move(e));

    if (!r.learn || mode_ != Mode::scenario) return;
    auto& entry = registry_.entry(m.recipient);
    if (!entry.trained()) return;

    registry_.install(learn(entry.latest(), m.topic, reply_text(m.recipient, m.topic), m.sender));
    entry.dirty = true;
    net::TraceEntry le;
    le.at = t;
    le.kind = net::TraceKind::learn;
    le.msg = m.id;
    le.from = m.recipient;
    le.node = entry.home;
    le.version = entry.latest_version();
    le.note = m.topic;
    trace_.append(std::move(le));

    if (sc_.config.propagation == PropagationMode::immediate) {
      propagate(t, m.recipient);
    } else if (!tick_pending_) {
      const double interval = sc_.config.batch_interval_s;
      tick_pending_ = true;
      schedule((std::floor(t / interval) + 1.0) * interval, PropagationTick{});
    }
  }

  void handle(SimTime t, const PropagationTick&) {
    tick_pending_ = false;
    std::vector<UserId> dirty;
    for (const auto& [owner, entry] : registry_.entries())
      if (entry.dirty) dirty.push_back(owner);
    for (const auto& owner : dirty) propagate(t, owner);
  }

  void propagate(SimTime t, const UserId& owner) {
    for (const auto& p : lifecycle::propagate(registry_, sc_.topology, owner)) start_transfer(t, p, net::TraceKind::propagate);
  }

  // --- lifecycle ------------------------------------------------------------

  void handle(SimTime t, const TrainingDone& d) {
    const auto owner = d.outcome.model.owner;
    registry_.install(d.outcome.model);
    const auto& entry = registry_.entry(owner);
    net::TraceEntry e;
    e.at = t;
    e.kind = net::TraceKind::training_complete;
    e.from = owner;
    e.node = entry.home;
    e.version = entry.latest_version();
    e.note = cost::to_json(d.outcome.cost);
    trace_.append(std::move(e));

    auto pending = std::move(deferred_placements_[owner]);
    deferred_placements_.erase(owner);
    for (const auto& node : pending) offload(t, owner, node);
  }

  void handle(SimTime t, const PlaceRequest& p) {
    if (!registry_.entry(p.owner).trained()) {
      deferred_placements_[p.owner].push_back(p.node);
      return;
    }
    offload(t, p.owner, p.node);
  }

  void offload(SimTime t, const UserId& owner, const NodeId& node) {
    auto p = lifecycle::offload(registry_, sc_.topology, owner, node);
    if (p.noop()) {
      net::TraceEntry e;
      e.at = t;
      e.kind = net::TraceKind::offload;
      e.from = owner;
      e.node = node;
      e.version = p.version;
      e.note = "noop";
      trace_.append(std::move(e));
      return;
    }
    start_transfer(t, p, net::TraceKind::offload);
  }

  void start_transfer(SimTime t, const lifecycle::Placement& p, net::TraceKind kind) {
    const auto& home = registry_.entry(p.owner).home;
    auto tr = send(home, p.node, p.transfer_bytes);
    net::TraceEntry e;
    e.at = t;
    e.kind = kind;
    e.from = p.owner;
    e.node = p.node;
    e.version = p.version;
    e.network_s = tr.latency_s;
    e.note = std::to_string(p.transfer_bytes) + " bytes from " + home;
    trace_.append(std::move(e));
    schedule(t + tr.latency_s, TransferDone{p, std::move(tr.charges)});
  }

  void handle(SimTime t, const TransferDone& d) {
    registry_.complete_transfer(d.placement.owner, d.placement.node, d.placement.version);
    net::TraceEntry e;
    e.at = t;
    e.kind = net::TraceKind::transfer_complete;
    e.from = d.placement.owner;
    e.node = d.placement.node;
    e.version = d.placement.version;
    e.model_bytes = d.placement.transfer_bytes;
    e.charges = d.charges;
    trace_.append(std::move(e));
  }

  const Scenario& sc_;
  Mode mode_;
  net::Router router_;
  net::EventQueue<Payload> queue_;
  net::Trace trace_;
  InteractionLog logs_;
  lifecycle::ModelRegistry registry_;
  std::map<UserId, UserState> users_;
  std::map<std::uint64_t, std::uint64_t> held_reply_bytes_;
  std::map<UserId, std::vector<NodeId>> deferred_placements_;
  bool tick_pending_ = false;
};

inline RunResult run(const Scenario& sc, Mode mode = Mode::scenario) { return Engine(sc, mode).run(); }

struct Outcome {
  RunResult result;
  metrics::RunReport report;
  metrics::RunReport baseline_report;
  metrics::ReductionReport reduction;
};

// Scenario run plus its forced-Active baseline on the same seed.
inline Outcome run_with_baseline(const Scenario& sc, bool include_model_transfer) {
  Outcome o;
  o.result = run(sc, Mode::scenario);
  o.report = metrics::summarize(o.result.trace);
  o.baseline_report = metrics::summarize(run(sc, Mode::baseline).trace);
  o.reduction = metrics::compare(o.baseline_report, o.report, include_model_transfer);
  return o;
}

}  // namespace llmcomm::sim
