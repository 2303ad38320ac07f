#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lbist/error.hpp"
#include "lbist/remote/agent.hpp"
#include "lbist/remote/server.hpp"
#include "lbist/remote/wire.hpp"

namespace lbist::remote {

struct NetConditions {
  double drop_probability = 0.0;
  double duplicate_probability = 0.0;
  std::uint64_t delay_min = 1;  // ticks, inclusive
  std::uint64_t delay_max = 1;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (!(drop_probability >= 0.0 && drop_probability <= 1.0) ||
        !(duplicate_probability >= 0.0 && duplicate_probability <= 1.0)) {
      throw validation_error("network probabilities must lie in [0, 1]");
    }
    if (delay_min > delay_max) throw validation_error("delay_min exceeds delay_max");
  }
};

struct Topology {
  ServerConfig server;
  ModelStore models = example_models();
  std::vector<AgentConfig> agents;
};

// Server issues `cycles` sessions to `device_id`, one every `interval` ticks
// from `start`.
struct PeriodicTests {
  std::uint32_t device_id = 0;
  std::uint64_t start = 0;
  std::uint64_t interval = 20;
  std::size_t cycles = 1;
  Scenario scenario = Scenario::signature_report;
};

struct ManualTest {
  std::uint64_t at = 0;
  std::uint32_t device_id = 0;
  Scenario scenario = Scenario::signature_report;
};

// Agent `requester_id` sends TEST_TRIGGER_REQ for `target_id` at `at`.
struct TriggerAt {
  std::uint64_t at = 0;
  std::uint32_t requester_id = 0;
  std::uint32_t target_id = 0;
  std::uint8_t reason = reason::comm_failure;
};

struct Script {
  std::vector<PeriodicTests> periodic;
  std::vector<ManualTest> manual;
  std::vector<TriggerAt> triggers;
  std::uint64_t horizon = 100'000;  // hard stop
};

struct SimResult {
  std::vector<std::string> trace;
  std::vector<TestSession> sessions;  // ordered by session id
  std::vector<std::string> session_log;
  std::size_t duplicate_reports = 0;
  std::size_t late_reports = 0;
  std::size_t frames_sent = 0;
  std::size_t frames_dropped = 0;
  std::size_t frames_duplicated = 0;
  std::uint64_t end_time = 0;

  std::size_t count(SessionOutcome o) const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.outcome == o;
    return n;
  }

  std::string trace_text() const {
    std::string out;
    for (const auto& l : trace) out += l + "\n";
    return out;
  }
};

// Single-threaded discrete-event network between one server and a set of
// agents. Frames travel as encoded bytes; every random draw comes from one
// mt19937_64 seeded with conditions.rng_seed, so a run is a pure function of
// (topology, conditions, script).
class SimNetwork {
 public:
  static constexpr std::uint32_t kServer = 0xFFFFFFFFu;

  SimNetwork(const Topology& topology, const NetConditions& conditions)
      : conditions_(conditions),
        server_(topology.server, topology.models),
        rng_(conditions.rng_seed) {
    conditions_.validate();
    for (const auto& a : topology.agents) {
      if (a.device_id == kServer) throw validation_error("device id reserved for the server");
      if (!agents_.emplace(a.device_id, DeviceAgent(a)).second) {
        throw validation_error("duplicate device id " + std::to_string(a.device_id));
      }
    }
  }

  SimResult run(const Script& script) {
    std::multimap<std::uint64_t, Action> actions;
    for (const auto& p : script.periodic) {
      for (std::size_t k = 0; k < p.cycles; ++k) {
        actions.emplace(p.start + k * p.interval, Action{Action::issue, p.device_id, 0, p.scenario, 0});
      }
    }
    for (const auto& m : script.manual) {
      actions.emplace(m.at, Action{Action::issue, m.device_id, 0, m.scenario, 0});
    }
    for (const auto& t : script.triggers) {
      actions.emplace(t.at, Action{Action::trigger, t.target_id, t.requester_id,
                                   Scenario::signature_report, t.reason});
    }

    for (auto& [id, agent] : agents_) {
      for (auto& m : agent.start(0)) send(0, id, kServer, m);
    }

    std::uint64_t now = 0;
    for (; now <= script.horizon; ++now) {
      deliver_due(now);
      for (auto [it, end] = actions.equal_range(now); it != end; ++it) perform(it->second, now);
      deliver_due(now);
      for (auto& o : server_.tick(now)) send(now, kServer, o.device_id, o.message);
      for (auto& [id, agent] : agents_) {
        for (auto& m : agent.tick(now)) send(now, id, kServer, m);
      }
      deliver_due(now);
      const bool script_done = actions.empty() || now >= actions.rbegin()->first;
      if (script_done && in_flight_.empty() && !server_.has_open_sessions() && agents_quiet()) break;
    }

    SimResult r;
    r.trace = std::move(trace_);
    for (const auto& [id, s] : server_.sessions()) r.sessions.push_back(s);
    r.session_log = server_.session_log();
    r.duplicate_reports = server_.duplicate_reports();
    r.late_reports = server_.late_reports();
    r.frames_sent = frames_sent_;
    r.frames_dropped = frames_dropped_;
    r.frames_duplicated = frames_duplicated_;
    r.end_time = std::min(now, script.horizon);
    return r;
  }

  const TestServer& server() const noexcept { return server_; }
  const DeviceAgent& agent(std::uint32_t id) const { return agents_.at(id); }

 private:
  struct Action {
    enum Kind { issue, trigger } kind;
    std::uint32_t device_id;
    std::uint32_t requester_id;
    Scenario scenario;
    std::uint8_t reason;
  };

  struct InFlight {
    std::uint64_t at;
    std::uint64_t seq;
    std::uint32_t from;
    std::uint32_t to;
    std::vector<std::uint8_t> bytes;
    bool operator>(const InFlight& o) const { return at != o.at ? at > o.at : seq > o.seq; }
  };

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::uint64_t delay() {
    const std::uint64_t span = conditions_.delay_max - conditions_.delay_min + 1;
    return conditions_.delay_min + rng_() % span;
  }

  static std::string node(std::uint32_t id) {
    return id == kServer ? std::string("server") : "d" + std::to_string(id);
  }

  void log(std::uint64_t now, const std::string& what, std::uint32_t from, std::uint32_t to,
           const std::string& detail) {
    std::ostringstream os;
    os << now << ' ' << what << ' ' << node(from) << "->" << node(to) << ' ' << detail;
    trace_.push_back(os.str());
  }

  void send(std::uint64_t now, std::uint32_t from, std::uint32_t to, const Message& msg) {
    ++frames_sent_;
    const std::string text = describe(msg);
    const bool drop = uniform() < conditions_.drop_probability;
    const bool dup = uniform() < conditions_.duplicate_probability;
    const std::uint64_t d1 = delay();
    const std::uint64_t d2 = delay();
    if (drop) {
      ++frames_dropped_;
      log(now, "drop", from, to, text);
      return;
    }
    log(now, "send", from, to, text);
    auto bytes = encode(msg);
    in_flight_.push({now + d1, seq_++, from, to, bytes});
    if (dup) {
      ++frames_duplicated_;
      log(now, "dup ", from, to, text);
      in_flight_.push({now + d2, seq_++, from, to, std::move(bytes)});
    }
  }

  void deliver_due(std::uint64_t now) {
    while (!in_flight_.empty() && in_flight_.top().at <= now) {
      InFlight f = in_flight_.top();
      in_flight_.pop();
      const Message msg = decode(f.bytes);
      log(now, "recv", f.from, f.to, describe(msg));
      if (f.to == kServer) {
        for (auto& o : server_.on_message(f.from, msg, now)) send(now, kServer, o.device_id, o.message);
      } else if (auto it = agents_.find(f.to); it != agents_.end()) {
        for (auto& m : it->second.on_message(msg, now)) send(now, f.to, kServer, m);
      }
    }
  }

  void perform(const Action& a, std::uint64_t now) {
    if (a.kind == Action::issue) {
      if (auto issued = server_.issue_test(a.device_id, a.scenario, now)) {
        send(now, kServer, issued->init.device_id, issued->init.message);
      } else {
        trace_.push_back(std::to_string(now) + " refused test of " + node(a.device_id));
      }
      return;
    }
    auto it = agents_.find(a.requester_id);
    if (it == agents_.end()) {
      throw validation_error("trigger requester " + std::to_string(a.requester_id) + " is not an agent");
    }
    send(now, a.requester_id, kServer, it->second.request_test(a.device_id, a.reason));
  }

  bool agents_quiet() const {
    for (const auto& [id, a] : agents_) {
      if ((!a.enrolled() && !a.rejected()) || a.has_pending_work()) return false;
    }
    return true;
  }

  NetConditions conditions_;
  TestServer server_;
  std::map<std::uint32_t, DeviceAgent> agents_;
  std::mt19937_64 rng_;
  std::priority_queue<InFlight, std::vector<InFlight>, std::greater<>> in_flight_;
  std::uint64_t seq_ = 0;
  std::vector<std::string> trace_;
  std::size_t frames_sent_ = 0;
  std::size_t frames_dropped_ = 0;
  std::size_t frames_duplicated_ = 0;
};

inline SimResult simnet_run(const Topology& topology, const NetConditions& conditions,
                            const Script& script) {
  return SimNetwork(topology, conditions).run(script);
}

}  // namespace lbist::remote
