#pragma once

// Deterministic stand-in for a personal model: a versioned knowledge base of
// topic -> reply templates, each gated by who may see it, plus the per-stage
// service-time profile of the serving pipeline.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>

#include "llmcomm/error.hpp"
#include "llmcomm/protocol.hpp"

namespace llmcomm {

struct Public {
  friend bool operator==(const Public&, const Public&) = default;
};
struct Private {
  friend bool operator==(const Private&, const Private&) = default;
};
struct Group {
  std::set<UserId> members;
  friend bool operator==(const Group&, const Group&) = default;
};

using Visibility = std::variant<Public, Group, Private>;

inline bool permits(const Visibility& v, const UserId& sender) {
  if (std::holds_alternative<Public>(v)) return true;
  if (const auto* g = std::get_if<Group>(&v)) return g->members.count(sender) > 0;
  return false;
}

struct Fact {
  std::string response_template;
  Visibility visibility = Public{};
};

// Defaults: text model load and process time, then speech synthesis load
// and process time.
struct ServiceProfile {
  double load_time_s = 6.62;
  double process_time_s = 9.64;
  double tts_load_s = 0.26;
  double tts_process_s = 0.18;
};

inline void validate(const ServiceProfile& p) {
  if (!(p.load_time_s >= 0 && p.process_time_s >= 0 && p.tts_load_s >= 0 && p.tts_process_s >= 0))
    throw Error(Errc::invalid_value, "service profile times must be non-negative");
}

enum class Stage : unsigned { text = 1u, tts = 2u };

class Stages {
 public:
  constexpr Stages() = default;
  constexpr Stages(std::initializer_list<Stage> s) {
    for (auto st : s) add(st);
  }
  constexpr void add(Stage s) { bits_ |= static_cast<unsigned>(s); }
  constexpr bool has(Stage s) const { return bits_ & static_cast<unsigned>(s); }
  constexpr bool empty() const { return bits_ == 0; }

 private:
  unsigned bits_ = 0;
};

// Cold adds the load time of each requested stage.
inline double service_time(const ServiceProfile& p, Stages stages, bool cold) {
  if (stages.empty()) throw Error(Errc::invalid_input, "service_time needs at least one stage");
  double t = 0.0;
  if (stages.has(Stage::text)) t += p.process_time_s + (cold ? p.load_time_s : 0.0);
  if (stages.has(Stage::tts)) t += p.tts_process_s + (cold ? p.tts_load_s : 0.0);
  return t;
}

struct PersonalModel {
  UserId owner;
  std::uint32_t version = 1;
  std::uint64_t size_bytes = 1;
  std::map<std::string, Fact> facts;
  ServiceProfile profile;
};

struct Response {
  std::string body;
  std::uint32_t model_version = 0;
  double service_time_s = 0.0;
};

inline bool answerable(const PersonalModel& model, const std::string& topic, const UserId& sender) {
  auto it = model.facts.find(topic);
  if (it == model.facts.end()) return false;
  if (sender == model.owner) return true;
  return permits(it->second.visibility, sender);
}

inline Response generate(const PersonalModel& model, const Message& msg, Stages stages = {Stage::text},
                         bool cold = false) {
  if (!answerable(model, msg.topic, msg.sender))
    throw Error(Errc::unanswerable, "model of " + model.owner + " cannot answer topic '" +
                                        msg.topic + "' for " + msg.sender);
  const auto& fact = model.facts.at(msg.topic);
  return {apply_disclosure(fact.response_template), model.version,
          service_time(model.profile, stages, cold)};
}

// New version with `topic` now answerable by the sender whose question
// prompted the owner's reply.
inline PersonalModel learn(const PersonalModel& model, const std::string& topic,
                           const std::string& user_reply, const UserId& triggering_sender) {
  if (user_reply.empty()) throw Error(Errc::empty_body, "cannot learn from an empty reply");
  PersonalModel next = model;
  next.version = model.version + 1;
  next.facts[topic] = Fact{user_reply, Group{{triggering_sender}}};
  return next;
}

}  // namespace llmcomm
