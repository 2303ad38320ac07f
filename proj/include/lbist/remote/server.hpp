#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lbist/dut.hpp"
#include "lbist/engine.hpp"
#include "lbist/error.hpp"
#include "lbist/remote/seed.hpp"
#include "lbist/remote/wire.hpp"

namespace lbist::remote {

// Golden model the server simulates for a class of devices. The seed in
// cfg_template is ignored; every session gets a fresh one.
struct DeviceModel {
  std::string name;
  Nlfsr dut;
  LbistConfig cfg_template;
};

class ModelStore {
 public:
  void add(std::uint32_t model_id, DeviceModel model) {
    model.cfg_template.validate_for(model.dut);
    models_.insert_or_assign(model_id, std::move(model));
  }
  const DeviceModel* find(std::uint32_t model_id) const {
    auto it = models_.find(model_id);
    return it == models_.end() ? nullptr : &it->second;
  }
  std::optional<std::uint32_t> id_of(const std::string& name) const {
    for (const auto& [id, m] : models_) {
      if (m.name == name) return id;
    }
    return std::nullopt;
  }
  const std::map<std::uint32_t, DeviceModel>& all() const noexcept { return models_; }

 private:
  std::map<std::uint32_t, DeviceModel> models_;
};

inline constexpr std::uint32_t kExampleModelId = 1;

// Model store holding the 4-bit example NLFSR as model 1 ("table1-nlfsr").
inline ModelStore example_models() {
  ModelStore store;
  store.add(kExampleModelId, {"table1-nlfsr", example_nlfsr4(), example_config4()});
  return store;
}

enum class DeviceStatus { idle, testing, unreachable };

inline std::string to_string(DeviceStatus s) {
  switch (s) {
    case DeviceStatus::idle: return "IDLE";
    case DeviceStatus::testing: return "TESTING";
    case DeviceStatus::unreachable: return "UNREACHABLE";
  }
  return "?";
}

inline DeviceStatus parse_device_status(const std::string& s) {
  if (s == "IDLE") return DeviceStatus::idle;
  if (s == "TESTING") return DeviceStatus::testing;
  if (s == "UNREACHABLE") return DeviceStatus::unreachable;
  throw parse_error("unknown device status \"" + s + "\"");
}

struct PendingTrigger {
  std::uint32_t requester_id = 0;
  std::uint8_t reason = 0;
};

struct DeviceRecord {
  std::uint32_t device_id = 0;
  std::uint32_t model_id = 0;
  std::uint64_t last_seed_counter = 0;
  DeviceStatus status = DeviceStatus::idle;
  std::deque<PendingTrigger> pending_triggers;
};

enum class SessionOutcome { open, pass, fail, timeout };

inline std::string to_string(SessionOutcome o) {
  switch (o) {
    case SessionOutcome::open: return "OPEN";
    case SessionOutcome::pass: return "PASS";
    case SessionOutcome::fail: return "FAIL";
    case SessionOutcome::timeout: return "TIMEOUT";
  }
  return "?";
}

struct TestSession {
  std::uint64_t session_id = 0;
  std::uint32_t device_id = 0;
  std::uint64_t seed_counter = 0;
  BitVec seed;
  std::uint32_t pattern_count = 0;
  Scenario scenario = Scenario::signature_report;
  BitVec expected_signature;
  SessionOutcome outcome = SessionOutcome::open;
  std::optional<std::uint8_t> trigger_reason;
  std::uint64_t issued_at = 0;
  std::uint64_t last_sent_at = 0;
  unsigned retransmissions = 0;
  std::uint64_t closed_at = 0;

  bool closed() const noexcept { return outcome != SessionOutcome::open; }
};

enum class SignatureSource { on_the_fly, precomputed };

struct ServerConfig {
  std::uint64_t secret = 0x5EED;
  std::uint64_t timeout = 5;  // ticks between (re)transmissions
  unsigned retries = 2;       // TEST_INIT retransmissions before TIMEOUT
  SignatureSource signatures = SignatureSource::on_the_fly;
  std::size_t precompute_limit = 1024;  // seeds per device in precomputed mode
  std::size_t trigger_queue_capacity = 16;
  Scenario trigger_scenario = Scenario::signature_report;
};

struct Outbound {
  std::uint32_t device_id = 0;
  Message message;
};

// Transport-independent test-management server. All state changes go
// through on_message, issue_test and tick; `now` is the caller's clock in
// ticks (simulated ticks or wall-clock seconds).
class TestServer {
 public:
  TestServer(ServerConfig config, ModelStore models)
      : config_(config), models_(std::move(models)) {}

  const ServerConfig& config() const noexcept { return config_; }
  const ModelStore& models() const noexcept { return models_; }

  // `sender` is the device the transport attributes the frame to, if known.
  std::vector<Outbound> on_message(std::optional<std::uint32_t> sender, const Message& msg,
                                   std::uint64_t now) {
    std::vector<Outbound> out;
    if (auto* m = std::get_if<Hello>(&msg)) {
      handle_hello(*m, now, out);
    } else if (auto* m = std::get_if<SigReport>(&msg)) {
      handle_report(sender, m->session_id, m, nullptr, now, out);
    } else if (auto* m = std::get_if<VerdictReport>(&msg)) {
      handle_report(sender, m->session_id, nullptr, m, now, out);
    } else if (auto* m = std::get_if<TriggerReq>(&msg)) {
      handle_trigger(*m, now, out);
    } else if (auto* m = std::get_if<ErrorMsg>(&msg)) {
      note(now, "error 0x" + BitVec::from_uint(m->code, 8).to_hex() + " from device " +
                    (sender ? std::to_string(*sender) : std::string("?")) + " for session " +
                    std::to_string(m->session_id));
      // An agent that cannot run the session will never report; close it now.
      if (auto it = sessions_.find(m->session_id); it != sessions_.end() && !it->second.closed() &&
                                                   m->code != errc::busy) {
        close(it->second, SessionOutcome::fail, now, out);
      }
    } else {
      note(now, "ignored unexpected " + describe(msg));
    }
    return out;
  }

  struct Issued {
    std::uint64_t session_id = 0;
    Outbound init;
  };

  // Opens a session for an enrolled device that is not already testing.
  // Returns nullopt (and sends nothing) if the device is unknown or busy.
  std::optional<Issued> issue_test(std::uint32_t device_id, Scenario scenario, std::uint64_t now,
                                   std::optional<std::uint8_t> trigger_reason = std::nullopt) {
    auto it = registry_.find(device_id);
    if (it == registry_.end()) {
      note(now, "refused test of unknown device " + std::to_string(device_id));
      return std::nullopt;
    }
    DeviceRecord& dev = it->second;
    if (dev.status == DeviceStatus::testing) {
      note(now, "refused test of busy device " + std::to_string(device_id));
      return std::nullopt;
    }
    const DeviceModel& model = *models_.find(dev.model_id);
    const SeedSchedule schedule = schedule_for(dev);
    const std::uint64_t counter = ++dev.last_seed_counter;
    if (schedule.wraps_at(counter)) {
      note(now, "device " + std::to_string(device_id) + " seed space exhausted; cycle restarts");
    }

    TestSession s;
    s.session_id = next_session_id_++;
    s.device_id = device_id;
    s.seed_counter = counter;
    s.seed = schedule.seed_for(counter);
    s.pattern_count = static_cast<std::uint32_t>(model.cfg_template.pattern_count);
    s.scenario = scenario;
    s.expected_signature = expected_signature(dev, model, counter, s.seed);
    s.trigger_reason = trigger_reason;
    s.issued_at = now;
    s.last_sent_at = now;
    dev.status = DeviceStatus::testing;
    auto [pos, inserted] = sessions_.emplace(s.session_id, std::move(s));
    return Issued{pos->first, Outbound{device_id, make_init(pos->second)}};
  }

  // Retransmits overdue TEST_INITs and times out exhausted sessions.
  std::vector<Outbound> tick(std::uint64_t now) {
    std::vector<Outbound> out;
    for (auto& [id, s] : sessions_) {
      if (s.closed() || now < s.last_sent_at + config_.timeout) continue;
      if (s.retransmissions < config_.retries) {
        ++s.retransmissions;
        s.last_sent_at = now;
        note(now, "retransmit session " + std::to_string(id) + " (" +
                      std::to_string(s.retransmissions) + "/" + std::to_string(config_.retries) + ")");
        out.push_back({s.device_id, make_init(s)});
      } else {
        close(s, SessionOutcome::timeout, now, out);
      }
    }
    return out;
  }

  const std::map<std::uint32_t, DeviceRecord>& registry() const noexcept { return registry_; }
  const std::map<std::uint64_t, TestSession>& sessions() const noexcept { return sessions_; }
  const TestSession* session(std::uint64_t id) const {
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : &it->second;
  }
  // Closed sessions, one line each: "timestamp device_id session_id scenario seed_hex count outcome".
  const std::vector<std::string>& session_log() const noexcept { return session_log_; }
  // Free-form server notes (refusals, duplicates, late reports, retransmissions).
  const std::vector<std::string>& notes() const noexcept { return notes_; }
  std::size_t duplicate_reports() const noexcept { return duplicate_reports_; }
  std::size_t late_reports() const noexcept { return late_reports_; }

  bool has_open_sessions() const {
    for (const auto& [id, s] : sessions_) {
      if (!s.closed()) return true;
    }
    return false;
  }

  // Registry text file, one device per line:
  //   device_id model_id last_seed_counter status
  void save_registry(const std::filesystem::path& path) const {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw storage_error("cannot write " + tmp.string());
      out << "# device_id model_id last_seed_counter status\n";
      for (const auto& [id, d] : registry_) {
        out << d.device_id << ' ' << d.model_id << ' ' << d.last_seed_counter << ' '
            << to_string(d.status) << '\n';
      }
      if (!out) throw storage_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  // Restores counters so seeds keep advancing across restarts. Devices come
  // back IDLE; open sessions are not persisted.
  void load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      DeviceRecord d;
      std::string status;
      if (!(ls >> d.device_id >> d.model_id >> d.last_seed_counter >> status)) {
        throw parse_error("bad registry line \"" + line + "\"");
      }
      parse_device_status(status);
      if (!models_.find(d.model_id)) {
        throw validation_error("registry references unknown model " + std::to_string(d.model_id));
      }
      d.status = DeviceStatus::idle;
      registry_[d.device_id] = d;
      if (config_.signatures == SignatureSource::precomputed) precompute(d);
    }
  }

  void append_session_log(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::app);
    if (!out) throw storage_error("cannot append to " + path.string());
    for (const auto& line : session_log_) out << line << '\n';
  }

 private:
  SeedSchedule schedule_for(const DeviceRecord& dev) const {
    return SeedSchedule(config_.secret, dev.device_id, models_.find(dev.model_id)->dut.width());
  }

  BitVec expected_signature(const DeviceRecord& dev, const DeviceModel& model,
                            std::uint64_t counter, const BitVec& seed) {
    if (config_.signatures == SignatureSource::precomputed) {
      auto& table = precomputed_[dev.device_id];
      if (auto it = table.find(counter); it != table.end()) return it->second;
    }
    return golden_signature(model.dut, model.cfg_template.with_seed(seed));
  }

  void precompute(const DeviceRecord& dev) {
    const DeviceModel& model = *models_.find(dev.model_id);
    const SeedSchedule schedule = schedule_for(dev);
    auto& table = precomputed_[dev.device_id];
    const std::uint64_t n = std::min<std::uint64_t>(schedule.period(), config_.precompute_limit);
    for (std::uint64_t c = dev.last_seed_counter + 1; c <= dev.last_seed_counter + n; ++c) {
      table.emplace(c, golden_signature(model.dut, model.cfg_template.with_seed(schedule.seed_for(c))));
    }
  }

  TestInit make_init(const TestSession& s) const {
    TestInit init;
    init.session_id = s.session_id;
    init.scenario = s.scenario;
    init.pattern_count = s.pattern_count;
    init.seed = s.seed;
    if (s.scenario == Scenario::local_verdict) init.expected_signature = s.expected_signature;
    return init;
  }

  void handle_hello(const Hello& m, std::uint64_t now, std::vector<Outbound>& out) {
    const DeviceModel* model = models_.find(m.model_id);
    if (!model) {
      note(now, "HELLO from device " + std::to_string(m.device_id) + " with unknown model " +
                    std::to_string(m.model_id));
      out.push_back({m.device_id, ErrorMsg{errc::unknown_model, 0}});
      return;
    }
    if (model->dut.width() != m.width) {
      note(now, "HELLO from device " + std::to_string(m.device_id) + " with width " +
                    std::to_string(m.width) + " for model " + std::to_string(m.model_id));
      out.push_back({m.device_id, ErrorMsg{errc::width_mismatch, 0}});
      return;
    }
    auto [it, inserted] = registry_.try_emplace(m.device_id);
    DeviceRecord& dev = it->second;
    if (inserted || dev.model_id != m.model_id) {
      if (!inserted) note(now, "device " + std::to_string(m.device_id) + " changed model");
      dev.device_id = m.device_id;
      dev.model_id = m.model_id;
      if (config_.signatures == SignatureSource::precomputed) precompute(dev);
      note(now, "enrolled device " + std::to_string(m.device_id) + " model " + model->name);
    } else {
      if (dev.status == DeviceStatus::unreachable) dev.status = DeviceStatus::idle;
      note(now, "refreshed device " + std::to_string(m.device_id));
    }
    out.push_back({m.device_id, HelloAck{0}});
  }

  void handle_report(std::optional<std::uint32_t> sender, std::uint64_t session_id,
                     const SigReport* sig, const VerdictReport* verdict, std::uint64_t now,
                     std::vector<Outbound>& out) {
    auto it = sessions_.find(session_id);
    if (it == sessions_.end() || (sender && it->second.device_id != *sender)) {
      note(now, "report for unknown session " + std::to_string(session_id));
      if (sender) out.push_back({*sender, ErrorMsg{errc::unknown_session, session_id}});
      return;
    }
    TestSession& s = it->second;
    if (s.outcome == SessionOutcome::timeout) {
      ++late_reports_;
      note(now, "late report for timed-out session " + std::to_string(session_id) + " discarded");
      return;
    }
    if (s.closed()) {
      ++duplicate_reports_;
      note(now, "duplicate report for closed session " + std::to_string(session_id) + " discarded");
      return;
    }
    if (sig) {
      if (sig->signature.width() != s.expected_signature.width()) {
        note(now, "signature width mismatch in session " + std::to_string(session_id));
        close(s, SessionOutcome::fail, now, out);
        return;
      }
      close(s, sig->signature == s.expected_signature ? SessionOutcome::pass : SessionOutcome::fail,
            now, out);
    } else {
      if (s.scenario != Scenario::local_verdict) {
        note(now, "verdict report for signature session " + std::to_string(session_id) + " ignored");
        return;
      }
      close(s, verdict->verdict == Outcome::pass ? SessionOutcome::pass : SessionOutcome::fail, now,
            out);
    }
  }

  void handle_trigger(const TriggerReq& m, std::uint64_t now, std::vector<Outbound>& out) {
    if (!registry_.contains(m.requester_id)) {
      note(now, "trigger from unenrolled device " + std::to_string(m.requester_id));
      out.push_back({m.requester_id, ErrorMsg{errc::not_enrolled, 0}});
      return;
    }
    auto it = registry_.find(m.target_id);
    if (it == registry_.end()) {
      note(now, "trigger from " + std::to_string(m.requester_id) + " for unknown target " +
                    std::to_string(m.target_id));
      out.push_back({m.requester_id, ErrorMsg{errc::unknown_target, 0}});
      return;
    }
    DeviceRecord& target = it->second;
    if (target.status == DeviceStatus::testing) {
      if (target.pending_triggers.size() >= config_.trigger_queue_capacity) {
        note(now, "trigger queue full for device " + std::to_string(m.target_id) + "; refused");
        return;
      }
      target.pending_triggers.push_back({m.requester_id, m.reason});
      note(now, "queued trigger for busy device " + std::to_string(m.target_id) + " reason " +
                    std::to_string(m.reason));
      return;
    }
    note(now, "trigger from " + std::to_string(m.requester_id) + " schedules device " +
                  std::to_string(m.target_id) + " reason " + std::to_string(m.reason));
    if (auto issued = issue_test(m.target_id, config_.trigger_scenario, now, m.reason)) {
      out.push_back(std::move(issued->init));
    }
  }

  void close(TestSession& s, SessionOutcome outcome, std::uint64_t now, std::vector<Outbound>& out) {
    s.outcome = outcome;
    s.closed_at = now;
    std::ostringstream line;
    line << now << ' ' << s.device_id << ' ' << s.session_id << ' ' << to_string(s.scenario) << ' '
         << s.seed.to_hex() << ' ' << s.pattern_count << ' ' << to_string(outcome);
    session_log_.push_back(line.str());
    note(now, "session " + std::to_string(s.session_id) + " device " + std::to_string(s.device_id) +
                  " " + to_string(outcome));

    DeviceRecord& dev = registry_.at(s.device_id);
    dev.status = outcome == SessionOutcome::timeout ? DeviceStatus::unreachable : DeviceStatus::idle;
    if (!dev.pending_triggers.empty()) {
      const PendingTrigger t = dev.pending_triggers.front();
      dev.pending_triggers.pop_front();
      note(now, "dequeued trigger for device " + std::to_string(dev.device_id));
      if (auto issued = issue_test(dev.device_id, config_.trigger_scenario, now, t.reason)) {
        out.push_back(std::move(issued->init));
      }
    }
  }

  void note(std::uint64_t now, std::string text) {
    notes_.push_back(std::to_string(now) + " " + std::move(text));
  }

  ServerConfig config_;
  ModelStore models_;
  std::map<std::uint32_t, DeviceRecord> registry_;
  std::map<std::uint64_t, TestSession> sessions_;
  std::map<std::uint32_t, std::map<std::uint64_t, BitVec>> precomputed_;
  std::uint64_t next_session_id_ = 1;
  std::vector<std::string> session_log_;
  std::vector<std::string> notes_;
  std::size_t duplicate_reports_ = 0;
  std::size_t late_reports_ = 0;
};

}  // namespace lbist::remote
