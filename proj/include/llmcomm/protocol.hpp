#pragma once

// Presence-status routing: which path an inbound message takes, the
// disclosure note on model-written replies, interaction logs and inbox drain.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llmcomm/error.hpp"
#include "llmcomm/format.hpp"

namespace llmcomm {

using UserId = std::string;
using NodeId = std::string;
using SimTime = double;

struct Message {
  std::uint64_t id = 0;
  UserId sender;
  UserId recipient;
  std::string topic;
  std::string body;
  std::uint64_t size_bytes = 0;
  SimTime sent_at = 0.0;
};

inline void validate(const Message& m) {
  if (m.sender == m.recipient)
    throw Error(Errc::invalid_input, "message " + std::to_string(m.id) + ": sender equals recipient");
  if (m.size_bytes == 0 || m.size_bytes < m.body.size())
    throw Error(Errc::invalid_input,
                "message " + std::to_string(m.id) + ": size_bytes smaller than body");
  if (!(m.sent_at >= 0.0))
    throw Error(Errc::invalid_input, "message " + std::to_string(m.id) + ": negative sent_at");
}

enum class Presence { Active, Busy, Away, Inactive };

inline constexpr std::array<Presence, 4> kAllPresence{Presence::Active, Presence::Busy,
                                                     Presence::Away, Presence::Inactive};

constexpr std::string_view to_string(Presence p) noexcept {
  switch (p) {
    case Presence::Active: return "Active";
    case Presence::Busy: return "Busy";
    case Presence::Away: return "Away";
    case Presence::Inactive: return "Inactive";
  }
  return "?";
}

inline std::optional<Presence> parse_presence(std::string_view s) {
  for (auto p : kAllPresence)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

class PresenceStatus {
 public:
  PresenceStatus() = default;
  PresenceStatus(Presence variant) : variant_(variant) {}  // NOLINT(google-explicit-constructor)

  static PresenceStatus busy(std::set<UserId> allowlist) {
    PresenceStatus s(Presence::Busy);
    s.allowlist_ = std::move(allowlist);
    return s;
  }

  Presence variant() const noexcept { return variant_; }
  const std::set<UserId>& allowlist() const noexcept { return allowlist_; }
  bool allows(const UserId& sender) const { return allowlist_.count(sender) > 0; }

  friend bool operator==(const PresenceStatus&, const PresenceStatus&) = default;

 private:
  Presence variant_ = Presence::Active;
  std::set<UserId> allowlist_;  // non-empty only for Busy
};

enum class RoutingAction { DeliverDirect, LLMServe, ForwardToRecipient, HoldInactive };

constexpr std::string_view to_string(RoutingAction a) noexcept {
  switch (a) {
    case RoutingAction::DeliverDirect: return "DeliverDirect";
    case RoutingAction::LLMServe: return "LLMServe";
    case RoutingAction::ForwardToRecipient: return "ForwardToRecipient";
    case RoutingAction::HoldInactive: return "HoldInactive";
  }
  return "?";
}

inline std::optional<RoutingAction> parse_action(std::string_view s) {
  for (auto a : {RoutingAction::DeliverDirect, RoutingAction::LLMServe,
                 RoutingAction::ForwardToRecipient, RoutingAction::HoldInactive})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

// Total over every valid input; answerable without a model is rejected.
constexpr RoutingAction decide_route(Presence status, bool sender_allowlisted,
                                     bool model_available, bool answerable) {
  if (answerable && !model_available)
    throw Error(Errc::invalid_input, "answerable requires model_available");
  switch (status) {
    case Presence::Active:
      return RoutingAction::DeliverDirect;
    case Presence::Busy:
      if (sender_allowlisted) return RoutingAction::DeliverDirect;
      [[fallthrough]];
    case Presence::Away:
      return (model_available && answerable) ? RoutingAction::LLMServe
                                             : RoutingAction::ForwardToRecipient;
    case Presence::Inactive:
      return RoutingAction::HoldInactive;
  }
  throw Error(Errc::invalid_input, "unknown presence variant");
}

inline RoutingAction decide_route(const PresenceStatus& status, const UserId& sender,
                                  bool model_available, bool answerable) {
  return decide_route(status.variant(), status.allows(sender), model_available, answerable);
}

struct RouteRow {
  Presence status;
  bool allowlisted;
  bool model_available;
  bool answerable;
  RoutingAction action;
};

// Every valid combination in a fixed order: status, allowlisted, model, answerable.
inline std::vector<RouteRow> route_table() {
  std::vector<RouteRow> rows;
  for (auto st : kAllPresence)
    for (bool allow : {false, true})
      for (bool avail : {false, true})
        for (bool ans : {false, true}) {
          if (ans && !avail) continue;
          rows.push_back({st, allow, avail, ans, decide_route(st, allow, avail, ans)});
        }
  return rows;
}

inline std::string route_table_csv() {
  std::string out = "status,allowlisted,model_available,answerable,action\n";
  auto b = [](bool v) { return v ? "true" : "false"; };
  for (const auto& r : route_table()) {
    out += std::string(to_string(r.status)) + "," + b(r.allowlisted) + "," + b(r.model_available) +
           "," + b(r.answerable) + "," + std::string(to_string(r.action)) + "\n";
  }
  return out;
}

inline constexpr std::string_view kDisclosureLine = "[This is an AI-generated message]";

// Not idempotent: tagging twice yields two note lines.
inline std::string apply_disclosure(std::string_view body) {
  if (body.empty()) throw Error(Errc::empty_body, "cannot tag an empty response");
  std::string out(body);
  out += '\n';
  out += kDisclosureLine;
  return out;
}

inline bool has_disclosure(std::string_view body) {
  constexpr auto n = kDisclosureLine.size();
  return body.size() > n && body.substr(body.size() - n) == kDisclosureLine &&
         body[body.size() - n - 1] == '\n';
}

struct InteractionLogRecord {
  SimTime ts = 0.0;
  UserId owner;
  UserId sender;
  std::string query;
  std::string response;
  std::uint32_t model_version = 0;
  Presence owner_status = Presence::Active;
  NodeId serving_node;
  std::uint64_t message_id = 0;  // in-memory only; not part of the JSONL schema
};

inline std::string to_jsonl(const InteractionLogRecord& r) {
  return JsonObject{}
      .real("ts", r.ts)
      .str("owner", r.owner)
      .str("sender", r.sender)
      .str("query", r.query)
      .str("response", r.response)
      .uinteger("model_version", r.model_version)
      .str("owner_status", to_string(r.owner_status))
      .str("serving_node", r.serving_node)
      .done();
}

// Append-only. Single writer per simulation run.
class InteractionLog {
 public:
  void record(InteractionLogRecord rec) {
    if (!has_disclosure(rec.response))
      throw Error(Errc::untagged_response,
                  "log record for " + rec.owner + " lacks the disclosure line");
    if (rec.model_version == 0) throw Error(Errc::invalid_input, "model_version must be positive");
    records_.push_back(std::move(rec));
  }

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<InteractionLogRecord>& records() const noexcept { return records_; }

  std::vector<InteractionLogRecord> by_owner(const UserId& owner) const {
    std::vector<InteractionLogRecord> out;
    std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
                 [&](const auto& r) { return r.owner == owner; });
    return out;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records_) out += llmcomm::to_jsonl(r) + "\n";
    return out;
  }

 private:
  std::vector<InteractionLogRecord> records_;
};

enum class HoldReason { forwarded_unanswerable, inactive_hold, direct };

constexpr std::string_view to_string(HoldReason r) noexcept {
  switch (r) {
    case HoldReason::forwarded_unanswerable: return "forwarded_unanswerable";
    case HoldReason::inactive_hold: return "inactive_hold";
    case HoldReason::direct: return "direct";
  }
  return "?";
}

class Inbox {
 public:
  struct Entry {
    Message message;
    HoldReason reason;
  };

  Inbox() = default;
  explicit Inbox(UserId owner) : owner_(std::move(owner)) {}

  void hold(Message m, HoldReason reason) {
    if (m.recipient != owner_)
      throw Error(Errc::invalid_input, "message " + std::to_string(m.id) + " is not for " + owner_);
    for (const auto& e : held_)
      if (e.message.id == m.id)
        throw Error(Errc::invalid_input, "message " + std::to_string(m.id) + " already held");
    held_.push_back({std::move(m), reason});
  }

  const UserId& owner() const noexcept { return owner_; }
  const std::vector<Entry>& held() const noexcept { return held_; }
  bool empty() const noexcept { return held_.empty(); }
  std::size_t size() const noexcept { return held_.size(); }
  std::optional<SimTime> drained_at() const noexcept { return drained_at_; }

  std::vector<Entry> take_all(SimTime now) {
    drained_at_ = now;
    return std::exchange(held_, {});
  }

 private:
  UserId owner_;
  std::vector<Entry> held_;
  std::optional<SimTime> drained_at_;
};

enum class DrainChoice { HumanReply, DelegateToLLM };

constexpr std::string_view to_string(DrainChoice d) noexcept {
  return d == DrainChoice::HumanReply ? "HumanReply" : "DelegateToLLM";
}

struct DrainDecision {
  Message message;
  HoldReason reason;
  DrainChoice choice;
};

// Recipient-side policy for messages that waited while the owner was away.
// `answerable` is only consulted by the delegating policies.
struct DrainPolicy {
  enum class Kind { always_human, delegate_if_answerable, seeded } kind = Kind::always_human;
  double delegate_probability = 0.5;  // seeded only
  std::uint64_t seed = 0;             // seeded only
};

inline std::string_view to_string(DrainPolicy::Kind k) {
  switch (k) {
    case DrainPolicy::Kind::always_human: return "always-human";
    case DrainPolicy::Kind::delegate_if_answerable: return "delegate-if-answerable";
    case DrainPolicy::Kind::seeded: return "seeded";
  }
  return "?";
}

inline std::optional<DrainPolicy::Kind> parse_drain_policy(std::string_view s) {
  for (auto k : {DrainPolicy::Kind::always_human, DrainPolicy::Kind::delegate_if_answerable,
                 DrainPolicy::Kind::seeded})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

namespace detail {
// splitmix64 finalizer used to make the seeded policy a pure function of
// (seed, message id).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

using AnswerableFn = std::function<bool(const Message&)>;

inline DrainChoice choose_drain(const DrainPolicy& policy, const Message& m,
                                const AnswerableFn& answerable) {
  switch (policy.kind) {
    case DrainPolicy::Kind::always_human:
      return DrainChoice::HumanReply;
    case DrainPolicy::Kind::delegate_if_answerable:
      return answerable && answerable(m) ? DrainChoice::DelegateToLLM : DrainChoice::HumanReply;
    case DrainPolicy::Kind::seeded: {
      if (!answerable || !answerable(m)) return DrainChoice::HumanReply;
      const double u =
          static_cast<double>(detail::mix64(policy.seed ^ m.id) >> 11) * 0x1.0p-53;
      return u < policy.delegate_probability ? DrainChoice::DelegateToLLM : DrainChoice::HumanReply;
    }
  }
  return DrainChoice::HumanReply;
}

// Only a transition to Active drains; any other status leaves the inbox as is.
inline std::vector<DrainDecision> on_status_change(const UserId& user,
                                                   const PresenceStatus& new_status, Inbox& inbox,
                                                   const DrainPolicy& policy,
                                                   const AnswerableFn& answerable = {},
                                                   SimTime now = 0.0) {
  if (inbox.owner() != user)
    throw Error(Errc::invalid_input, "inbox of " + inbox.owner() + " passed for " + user);
  std::vector<DrainDecision> out;
  if (new_status.variant() != Presence::Active) return out;
  for (auto& e : inbox.take_all(now)) {
    auto choice = choose_drain(policy, e.message, answerable);
    out.push_back({std::move(e.message), e.reason, choice});
  }
  return out;
}

}  // namespace llmcomm
