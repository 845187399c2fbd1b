#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include <json.hpp>

namespace llmcomm {

// Every real that reaches a file goes through here so reruns are byte-identical.
inline std::string fixed6(double v) {
  if (v == 0.0) v = 0.0;  // folds -0.0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string json_quote(std::string_view s) {
  return nlohmann::json(std::string(s)).dump();
}

// Minimal ordered JSON object writer; keys appear in insertion order.
class JsonObject {
 public:
  JsonObject& raw(std::string_view key, std::string_view json_value) {
    sep();
    out_ += json_quote(key);
    out_ += ':';
    out_ += json_value;
    return *this;
  }
  JsonObject& str(std::string_view key, std::string_view v) { return raw(key, json_quote(v)); }
  JsonObject& real(std::string_view key, double v) { return raw(key, fixed6(v)); }
  JsonObject& integer(std::string_view key, std::int64_t v) { return raw(key, std::to_string(v)); }
  JsonObject& uinteger(std::string_view key, std::uint64_t v) { return raw(key, std::to_string(v)); }
  JsonObject& boolean(std::string_view key, bool v) { return raw(key, v ? "true" : "false"); }
  JsonObject& null(std::string_view key) { return raw(key, "null"); }

  std::string done() const { return "{" + out_ + "}"; }

 private:
  void sep() {
    if (!out_.empty()) out_ += ',';
  }
  std::string out_;
};

}  // namespace llmcomm
