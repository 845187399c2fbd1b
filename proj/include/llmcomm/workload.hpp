#pragma once

// Seeded scenario generation: Poisson message flows and status schedules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "llmcomm/error.hpp"
#include "llmcomm/protocol.hpp"

namespace llmcomm::workload {

struct PrngState {
  std::uint64_t state = 0;
  friend bool operator==(const PrngState&, const PrngState&) = default;
};

// splitmix64
constexpr std::pair<PrngState, std::uint64_t> prng_next(PrngState s) {
  std::uint64_t st = s.state + 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = st;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return {PrngState{st}, z ^ (z >> 31)};
}

// Maps a raw output onto (0, 1]; never returns 0 so the log is finite.
inline double unit_open_closed(std::uint64_t raw) {
  return (static_cast<double>(raw) + 1.0) / 18446744073709551616.0;  // 2^64
}

inline double exponential_from_unit(double rate, double u) {
  if (!(rate > 0.0)) throw Error(Errc::invalid_value, "exponential rate must be positive");
  return -std::log(u) / rate;
}

inline std::pair<PrngState, double> sample_exponential(double rate, PrngState s) {
  if (!(rate > 0.0)) throw Error(Errc::invalid_value, "exponential rate must be positive");
  auto [next, raw] = prng_next(s);
  return {next, exponential_from_unit(rate, unit_open_closed(raw))};
}

// Uniform on [0, 1) with 53 bits.
inline std::pair<PrngState, double> sample_unit(PrngState s) {
  auto [next, raw] = prng_next(s);
  return {next, static_cast<double>(raw >> 11) * 0x1.0p-53};
}

// Topic key standing for "something the recipient may or may not know";
// resolved at generation time with probability p_answerable_unknown.
inline constexpr std::string_view kUnknownTopic = "?";

struct Flow {
  UserId sender;
  UserId recipient;
  double rate_per_s = 1.0;
  std::uint64_t msg_bytes = 512;
  std::uint64_t reply_bytes = 0;  // 0: same as msg_bytes
  std::map<std::string, double> topics;
  double start_s = 0.0;
  std::optional<std::uint64_t> max_messages;
};

struct StatusChange {
  UserId user;
  SimTime at = 0.0;
  PresenceStatus status;
};

struct ScenarioParams {
  std::uint64_t seed = 0;
  double duration_s = 1.0;
  std::vector<Flow> flows;
  std::vector<StatusChange> status_schedule;
  double p_answerable_unknown = 0.0;
  // Candidate topics substituted for kUnknownTopic when the draw says "answerable".
  std::map<UserId, std::vector<std::string>> recipient_topics;
};

inline std::string query_body(const std::string& topic) { return topic + "?"; }

inline void validate(const ScenarioParams& p) {
  if (!(p.duration_s > 0.0)) throw Error(Errc::invalid_value, "duration_s must be positive");
  if (!(p.p_answerable_unknown >= 0.0 && p.p_answerable_unknown <= 1.0))
    throw Error(Errc::invalid_probability, "p_answerable_unknown must lie in [0,1]");
  for (std::size_t i = 0; i < p.flows.size(); ++i) {
    const auto& f = p.flows[i];
    const std::string where = "flows[" + std::to_string(i) + "]";
    if (f.sender == f.recipient) throw Error(Errc::invalid_value, where + ": sender equals recipient");
    if (!(f.rate_per_s > 0.0)) throw Error(Errc::invalid_value, where + ".rate_per_s must be positive");
    if (f.msg_bytes == 0) throw Error(Errc::invalid_value, where + ".msg_bytes must be positive");
    if (!(f.start_s >= 0.0)) throw Error(Errc::invalid_value, where + ".start_s must be non-negative");
    if (f.topics.empty()) throw Error(Errc::invalid_probability, where + ": empty topic distribution");
    double sum = 0.0;
    for (const auto& [topic, prob] : f.topics) {
      if (!(prob >= 0.0 && prob <= 1.0))
        throw Error(Errc::invalid_probability, where + ": probability of '" + topic + "' outside [0,1]");
      if (f.msg_bytes < query_body(topic).size())
        throw Error(Errc::invalid_value, where + ".msg_bytes smaller than the query for '" + topic + "'");
      sum += prob;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw Error(Errc::invalid_probability,
                  where + ": topic probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
  for (const auto& s : p.status_schedule)
    if (!(s.at >= 0.0)) throw Error(Errc::invalid_value, "status change for " + s.user + " at negative time");
}

struct GeneratedEvent {
  SimTime at = 0.0;
  // Status changes sort ahead of arrivals at the same instant.
  enum class Kind { status_change, message } kind = Kind::message;
  std::size_t source = 0;  // flow index, or schedule index for status changes
  std::uint64_t index = 0;
  Message message;
  StatusChange status;
  std::uint64_t reply_bytes = 0;
};

namespace detail {
inline std::string draw_topic(const std::map<std::string, double>& dist, double u) {
  double acc = 0.0;
  const std::string* last = nullptr;
  for (const auto& [topic, prob] : dist) {
    if (prob <= 0.0) continue;
    last = &topic;
    acc += prob;
    if (u < acc) return topic;
  }
  return *last;
}
}  // namespace detail

// Pure function of params. Messages get ids 1..N in the final event order.
inline std::vector<GeneratedEvent> generate(const ScenarioParams& params) {
  validate(params);
  std::vector<GeneratedEvent> events;

  for (std::size_t i = 0; i < params.status_schedule.size(); ++i) {
    GeneratedEvent e;
    e.at = params.status_schedule[i].at;
    e.kind = GeneratedEvent::Kind::status_change;
    e.source = i;
    e.status = params.status_schedule[i];
    events.push_back(std::move(e));
  }

  PrngState master{params.seed};
  for (std::size_t fi = 0; fi < params.flows.size(); ++fi) {
    const auto& flow = params.flows[fi];
    auto [m_next, flow_seed] = prng_next(master);
    master = m_next;
    PrngState s{flow_seed};
    double t = flow.start_s;
    std::uint64_t k = 0;
    while (!flow.max_messages || k < *flow.max_messages) {
      auto [s1, gap] = sample_exponential(flow.rate_per_s, s);
      t += gap;
      if (t > params.duration_s) break;
      auto [s2, u_topic] = sample_unit(s1);
      auto [s3, u_known] = sample_unit(s2);
      s = s3;

      std::string topic = detail::draw_topic(flow.topics, u_topic);
      if (topic == kUnknownTopic) {
        auto it = params.recipient_topics.find(flow.recipient);
        const bool known = u_known < params.p_answerable_unknown && it != params.recipient_topics.end() &&
                           !it->second.empty();
        if (known) {
          const auto& pool = it->second;
          topic = pool[static_cast<std::size_t>(u_known / params.p_answerable_unknown *
                                                static_cast<double>(pool.size())) %
                       pool.size()];
        } else {
          topic = "unknown-" + std::to_string(fi) + "-" + std::to_string(k);
        }
      }

      GeneratedEvent e;
      e.at = t;
      e.kind = GeneratedEvent::Kind::message;
      e.source = fi;
      e.index = k;
      e.message.sender = flow.sender;
      e.message.recipient = flow.recipient;
      e.message.topic = topic;
      e.message.body = query_body(topic);
      e.message.size_bytes = std::max<std::uint64_t>(flow.msg_bytes, e.message.body.size());
      e.message.sent_at = t;
      e.reply_bytes = flow.reply_bytes ? flow.reply_bytes : flow.msg_bytes;
      events.push_back(std::move(e));
      ++k;
    }
  }

  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.at != b.at) return a.at < b.at;
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.source != b.source) return a.source < b.source;
    return a.index < b.index;
  });

  std::uint64_t next_id = 1;
  for (auto& e : events)
    if (e.kind == GeneratedEvent::Kind::message) e.message.id = next_id++;
  return events;
}

}  // namespace llmcomm::workload
