#pragma once

// Line protocol for plugging an external model behind the responder.
// One JSON object per line in each direction:
//   request  {"id":..,"owner":..,"sender":..,"topic":..,"body":..}
//   response {"id":..,"answerable":true|false,"body":..}
// Timeouts, malformed lines and id mismatches all read as "unanswerable".

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "llmcomm/error.hpp"
#include "llmcomm/format.hpp"
#include "llmcomm/protocol.hpp"

namespace llmcomm::adapter {

struct Request {
  std::uint64_t id = 0;
  UserId owner;
  UserId sender;
  std::string topic;
  std::string body;
};

struct Reply {
  std::uint64_t id = 0;
  bool answerable = false;
  std::string body;
};

inline Request request_for(const Message& m) { return {m.id, m.recipient, m.sender, m.topic, m.body}; }

inline std::string encode(const Request& r) {
  return JsonObject{}
             .uinteger("id", r.id)
             .str("owner", r.owner)
             .str("sender", r.sender)
             .str("topic", r.topic)
             .str("body", r.body)
             .done() +
         "\n";
}

inline Reply unanswerable(std::uint64_t id) { return {id, false, {}}; }

inline Reply decode(std::string_view line, std::uint64_t expected_id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return unanswerable(expected_id);
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned() || !j.contains("answerable") ||
      !j["answerable"].is_boolean())
    return unanswerable(expected_id);
  if (j["id"].get<std::uint64_t>() != expected_id) return unanswerable(expected_id);
  Reply r{expected_id, j["answerable"].get<bool>(), {}};
  if (r.answerable) {
    if (!j.contains("body") || !j["body"].is_string() || j["body"].get<std::string>().empty())
      return unanswerable(expected_id);
    r.body = j["body"].get<std::string>();
  }
  return r;
}

// Blocking client over a connected stream socket. Owns the descriptor.
class Client {
 public:
  Client(int fd, std::chrono::milliseconds timeout) : fd_(fd), timeout_(timeout) {}

  static Client connect_unix(const std::string& path, std::chrono::milliseconds timeout) {
    int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Errc::io_error, "socket(): " + std::string(std::strerror(errno)));
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof addr.sun_path) {
      ::close(fd);
      throw Error(Errc::invalid_input, "socket path too long: " + path);
    }
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw Error(Errc::io_error, "connect(" + path + "): " + why);
    }
    return Client(fd, timeout);
  }

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;
  Client(Client&& o) noexcept
      : fd_(std::exchange(o.fd_, -1)), timeout_(o.timeout_), pending_(std::move(o.pending_)) {}
  Client& operator=(Client&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
      timeout_ = o.timeout_;
      pending_ = std::move(o.pending_);
    }
    return *this;
  }
  ~Client() { close(); }

  Reply ask(const Request& req) {
    const auto line = encode(req);
    std::size_t sent = 0;
    while (sent < line.size()) {
      auto n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return unanswerable(req.id);
      sent += static_cast<std::size_t>(n);
    }
    auto reply_line = read_line();
    if (!reply_line) return unanswerable(req.id);
    return decode(*reply_line, req.id);
  }

 private:
  std::optional<std::string> read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
      auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
      char buf[4096];
      auto n = ::recv(fd_, buf, sizeof buf, 0);
      if (n <= 0) return std::nullopt;
      pending_.append(buf, static_cast<std::size_t>(n));
    }
  }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  int fd_ = -1;
  std::chrono::milliseconds timeout_;
  std::string pending_;
};

}  // namespace llmcomm::adapter
