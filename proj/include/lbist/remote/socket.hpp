#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lbist/error.hpp"
#include "lbist/remote/agent.hpp"
#include "lbist/remote/server.hpp"
#include "lbist/remote/wire.hpp"

namespace lbist::remote::net {

class socket_error : public error {
 public:
  using error::error;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::uint16_t local_port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
      throw socket_error(std::string("getsockname: ") + std::strerror(errno));
    }
    return ntohs(addr.sin_port);
  }

 private:
  int fd_ = -1;
};

// Listens on host:port (IPv4). Port 0 picks an ephemeral port.
inline Socket listen_tcp(const std::string& host, std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw socket_error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw socket_error("bad listen address " + host);
  }
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw socket_error("bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  }
  if (::listen(s.fd(), 64) != 0) throw socket_error(std::string("listen: ") + std::strerror(errno));
  return s;
}

inline Socket connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0) {
    throw socket_error("resolve " + host + ": " + ::gai_strerror(rc));
  }
  Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  const int rc = s.valid() ? ::connect(s.fd(), res->ai_addr, res->ai_addrlen) : -1;
  const int err = errno;
  ::freeaddrinfo(res);
  if (rc != 0) {
    throw socket_error("connect " + host + ":" + std::to_string(port) + ": " + std::strerror(err));
  }
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

inline bool send_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

inline bool send_message(int fd, const Message& msg) { return send_all(fd, encode(msg)); }

// Reads what is available; false on EOF or error.
inline bool read_into(int fd, FrameReader& reader) {
  std::uint8_t buf[4096];
  const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
  if (n < 0 && errno == EINTR) return true;
  if (n <= 0) return false;
  reader.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
  return true;
}

enum class SchedulePolicy { periodic, on_trigger, manual };

inline SchedulePolicy parse_schedule_policy(const std::string& s) {
  if (s == "periodic") return SchedulePolicy::periodic;
  if (s == "on-trigger" || s == "on_trigger") return SchedulePolicy::on_trigger;
  if (s == "manual") return SchedulePolicy::manual;
  throw parse_error("unknown schedule policy \"" + s + "\"");
}

struct ServeOptions {
  SchedulePolicy policy = SchedulePolicy::periodic;
  std::uint64_t interval = 10;  // ticks between periodic sessions per device
  Scenario scenario = Scenario::signature_report;
  std::size_t max_sessions = 0;  // stop after this many closed sessions; 0 = run until stopped
  std::chrono::milliseconds tick{1000};
  bool read_commands = false;  // manual policy: "test <device_id> [sig|verdict]" lines on stdin
};

using LogFn = std::function<void(const std::string&)>;

// Single-threaded poll loop serving every connected agent. The server state
// is touched only from this loop.
inline void run_server(TestServer& server, Socket& listener, const ServeOptions& opt,
                       const std::atomic<bool>& stop, const LogFn& log = {}) {
  struct Conn {
    Socket sock;
    FrameReader reader;
    std::optional<std::uint32_t> device;
  };
  std::map<int, Conn> conns;
  std::map<std::uint32_t, int> fd_of;
  std::map<std::uint32_t, std::uint64_t> next_due;
  std::string stdin_buf;
  const auto t0 = std::chrono::steady_clock::now();
  auto now_ticks = [&] {
    return static_cast<std::uint64_t>((std::chrono::steady_clock::now() - t0) / opt.tick);
  };
  auto emit = [&](const std::string& s) {
    if (log) log(s);
  };
  auto deliver = [&](const std::vector<Outbound>& out) {
    for (const auto& o : out) {
      auto it = fd_of.find(o.device_id);
      if (it == fd_of.end()) {
        emit("no connection for device " + std::to_string(o.device_id) + "; dropped " + describe(o.message));
        continue;
      }
      emit("send d" + std::to_string(o.device_id) + " " + describe(o.message));
      send_message(it->second, o.message);
    }
  };
  auto closed_sessions = [&] { return server.session_log().size(); };

  while (!stop.load()) {
    if (opt.max_sessions > 0 && closed_sessions() >= opt.max_sessions) break;
    std::vector<pollfd> fds;
    fds.push_back({listener.fd(), POLLIN, 0});
    if (opt.read_commands) fds.push_back({STDIN_FILENO, POLLIN, 0});
    for (const auto& [fd, c] : conns) fds.push_back({fd, POLLIN, 0});
    const int wait_ms = static_cast<int>(std::min<std::int64_t>(opt.tick.count(), 100));
    if (::poll(fds.data(), fds.size(), wait_ms) < 0 && errno != EINTR) {
      throw socket_error(std::string("poll: ") + std::strerror(errno));
    }
    const std::uint64_t now = now_ticks();

    for (const auto& p : fds) {
      if (!(p.revents & (POLLIN | POLLHUP | POLLERR))) continue;
      if (p.fd == listener.fd()) {
        const int fd = ::accept(listener.fd(), nullptr, nullptr);
        if (fd >= 0) {
          int one = 1;
          ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
          conns.emplace(fd, Conn{Socket(fd), {}, std::nullopt});
        }
        continue;
      }
      if (opt.read_commands && p.fd == STDIN_FILENO) {
        char buf[512];
        const ssize_t n = ::read(STDIN_FILENO, buf, sizeof buf);
        if (n > 0) stdin_buf.append(buf, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = stdin_buf.find('\n')) != std::string::npos) {
          std::istringstream cmd(stdin_buf.substr(0, nl));
          stdin_buf.erase(0, nl + 1);
          std::string verb, scen;
          std::uint32_t id = 0;
          if (cmd >> verb >> id && verb == "test") {
            cmd >> scen;
            const Scenario s = scen == "verdict" ? Scenario::local_verdict : opt.scenario;
            if (auto issued = server.issue_test(id, s, now)) deliver({issued->init});
          }
        }
        continue;
      }
      auto it = conns.find(p.fd);
      if (it == conns.end()) continue;
      Conn& c = it->second;
      bool alive = read_into(p.fd, c.reader);
      try {
        while (auto msg = c.reader.next()) {
          if (auto* h = std::get_if<Hello>(&*msg)) {
            c.device = h->device_id;
            fd_of[h->device_id] = p.fd;
          }
          emit("recv " + (c.device ? "d" + std::to_string(*c.device) : std::string("?")) + " " +
               describe(*msg));
          deliver(server.on_message(c.device, *msg, now));
        }
      } catch (const protocol_error& e) {
        emit(std::string("protocol error, closing connection: ") + e.what());
        alive = false;
      }
      if (!alive) {
        if (c.device && fd_of[*c.device] == p.fd) fd_of.erase(*c.device);
        conns.erase(it);
      }
    }

    deliver(server.tick(now));

    if (opt.policy == SchedulePolicy::periodic) {
      for (const auto& [id, dev] : server.registry()) {
        if (dev.status == DeviceStatus::testing || !fd_of.contains(id)) continue;
        auto [due, fresh] = next_due.try_emplace(id, now);
        if (now < due->second) continue;
        due->second = now + opt.interval;
        if (auto issued = server.issue_test(id, opt.scenario, now)) deliver({issued->init});
      }
    }
  }
}

struct AgentRunSummary {
  std::size_t reports_sent = 0;
  bool server_closed = false;
};

// Connects to the server and serves TEST_INITs until the server hangs up,
// `max_sessions` reports have been sent (0 = unlimited) or `stop` is set.
inline AgentRunSummary run_agent(DeviceAgent& agent, const std::string& host, std::uint16_t port,
                                 std::size_t max_sessions, const std::atomic<bool>& stop,
                                 std::chrono::milliseconds tick = std::chrono::milliseconds(1000),
                                 const LogFn& log = {}) {
  Socket sock = connect_tcp(host, port);
  FrameReader reader;
  AgentRunSummary summary;
  const auto t0 = std::chrono::steady_clock::now();
  auto now_ticks = [&] {
    return static_cast<std::uint64_t>((std::chrono::steady_clock::now() - t0) / tick);
  };
  auto send = [&](const std::vector<Message>& msgs) {
    for (const auto& m : msgs) {
      if (log) log("send " + describe(m));
      if (std::holds_alternative<SigReport>(m) || std::holds_alternative<VerdictReport>(m)) {
        ++summary.reports_sent;
      }
      if (!send_message(sock.fd(), m)) throw socket_error("send failed");
    }
  };
  send(agent.start(0));
  while (!stop.load()) {
    if (max_sessions > 0 && agent.executions() >= max_sessions) break;
    pollfd p{sock.fd(), POLLIN, 0};
    const int wait_ms = static_cast<int>(std::min<std::int64_t>(tick.count(), 100));
    if (::poll(&p, 1, wait_ms) < 0 && errno != EINTR) {
      throw socket_error(std::string("poll: ") + std::strerror(errno));
    }
    const std::uint64_t now = now_ticks();
    if (p.revents & (POLLIN | POLLHUP | POLLERR)) {
      if (!read_into(sock.fd(), reader)) {
        summary.server_closed = true;
        break;
      }
      while (auto msg = reader.next()) {
        if (log) log("recv " + describe(*msg));
        send(agent.on_message(*msg, now));
      }
    }
    send(agent.tick(now));
  }
  return summary;
}

}  // namespace lbist::remote::net
