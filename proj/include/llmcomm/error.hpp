#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace llmcomm {

// Named failure conditions. The name is what the CLI prints, so keep them
// stable once published.
enum class Errc {
  invalid_input,
  empty_body,
  untagged_response,
  unanswerable,
  unknown_user,
  unknown_node,
  unknown_key,
  invalid_probability,
  invalid_value,
  missing_key,
  disconnected_topology,
  invalid_topology,
  event_in_past,
  io_error,
  parse_error,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::invalid_input: return "invalid_input";
    case Errc::empty_body: return "empty_body";
    case Errc::untagged_response: return "untagged_response";
    case Errc::unanswerable: return "unanswerable";
    case Errc::unknown_user: return "unknown_user";
    case Errc::unknown_node: return "unknown_node";
    case Errc::unknown_key: return "unknown_key";
    case Errc::invalid_probability: return "invalid_probability";
    case Errc::invalid_value: return "invalid_value";
    case Errc::missing_key: return "missing_key";
    case Errc::disconnected_topology: return "disconnected_topology";
    case Errc::invalid_topology: return "invalid_topology";
    case Errc::event_in_past: return "event_in_past";
    case Errc::io_error: return "io_error";
    case Errc::parse_error: return "parse_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace llmcomm
