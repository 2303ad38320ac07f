#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lbist/dut.hpp"
#include "lbist/engine.hpp"
#include "lbist/remote/wire.hpp"

namespace lbist::remote {

struct AgentConfig {
  std::uint32_t device_id = 0;
  std::uint32_t model_id = 0;
  Nlfsr dut = example_nlfsr4();
  // Polynomials and MISR init used on-device; seed and count come from TEST_INIT.
  LbistConfig cfg_template = example_config4();
  // Injected stuck-at faults (the Trojaned-device case).
  FaultSet faults;
  FaultMode mode = FaultMode::capture_only;
  std::uint64_t execution_ticks = 0;  // LBIST run time; > 0 makes the agent busy meanwhile
  unsigned report_repeats = 0;        // extra unsolicited copies of each report
  std::uint64_t repeat_interval = 2;
  std::uint64_t hello_interval = 5;   // HELLO retry period until HELLO_ACK
};

// Device-side endpoint: enrolls with HELLO, runs LBIST on TEST_INIT and
// replies with a signature or a local verdict.
class DeviceAgent {
 public:
  explicit DeviceAgent(AgentConfig config) : config_(std::move(config)) {}

  const AgentConfig& config() const noexcept { return config_; }
  bool enrolled() const noexcept { return enrolled_; }
  bool rejected() const noexcept { return rejected_; }
  std::size_t executions() const noexcept { return executions_; }
  // True while a test is running or report copies are still scheduled.
  bool has_pending_work() const noexcept { return running_.has_value() || !repeats_.empty(); }
  const std::vector<std::string>& notes() const noexcept { return notes_; }

  std::vector<Message> start(std::uint64_t now) {
    last_hello_ = now;
    return {hello()};
  }

  std::vector<Message> on_message(const Message& msg, std::uint64_t now) {
    std::vector<Message> out;
    if (std::holds_alternative<HelloAck>(msg)) {
      enrolled_ = std::get<HelloAck>(msg).status == 0;
    } else if (auto* init = std::get_if<TestInit>(&msg)) {
      handle_init(*init, now, out);
    } else if (auto* err = std::get_if<ErrorMsg>(&msg)) {
      notes_.push_back(std::to_string(now) + " server error 0x" +
                       BitVec::from_uint(err->code, 8).to_hex());
      if (!enrolled_ && (err->code == errc::unknown_model || err->code == errc::width_mismatch)) {
        rejected_ = true;
      }
    }
    return out;
  }

  std::vector<Message> tick(std::uint64_t now) {
    std::vector<Message> out;
    if (!enrolled_ && !rejected_ && now >= last_hello_ + config_.hello_interval) {
      last_hello_ = now;
      out.push_back(hello());
    }
    if (running_ && now >= running_->done_at) {
      Message reply = execute(running_->init);
      running_.reset();
      send_report(std::move(reply), now, out);
    }
    for (auto& r : repeats_) {
      if (r.remaining > 0 && now >= r.next_at) {
        --r.remaining;
        r.next_at = now + config_.repeat_interval;
        out.push_back(r.reply);
      }
    }
    std::erase_if(repeats_, [](const Repeat& r) { return r.remaining == 0; });
    return out;
  }

  // Asks the server to test another device, e.g. after repeated failures to
  // reach it.
  Message request_test(std::uint32_t target_id, std::uint8_t reason_code) const {
    return TriggerReq{config_.device_id, target_id, reason_code};
  }

  // Runs the DUT's LBIST under the received parameters.
  Message execute(const TestInit& init) {
    ++executions_;
    LbistConfig cfg = config_.cfg_template.with_seed(init.seed);
    cfg.pattern_count = init.pattern_count;
    const BitVec signature = run_lbist(config_.dut, cfg, config_.faults, config_.mode);
    if (init.scenario == Scenario::signature_report) {
      return SigReport{init.session_id, signature};
    }
    return VerdictReport{init.session_id, decide(signature, *init.expected_signature).outcome};
  }

 private:
  struct Running {
    TestInit init;
    std::uint64_t done_at = 0;
  };
  struct Repeat {
    Message reply;
    unsigned remaining = 0;
    std::uint64_t next_at = 0;
  };

  Message hello() const {
    return Hello{config_.device_id, config_.model_id,
                 static_cast<std::uint8_t>(config_.dut.width())};
  }

  void handle_init(const TestInit& init, std::uint64_t now, std::vector<Message>& out) {
    for (const auto& [sid, reply] : cache_) {
      if (sid == init.session_id) {
        out.push_back(reply);
        return;
      }
    }
    if (running_) {
      if (running_->init.session_id != init.session_id) {
        out.push_back(ErrorMsg{errc::busy, init.session_id});
      }
      return;
    }
    const std::size_t w = config_.dut.width();
    if (init.seed.width() != w || init.seed.is_zero() || init.pattern_count == 0 ||
        (init.expected_signature && init.expected_signature->width() != w)) {
      out.push_back(ErrorMsg{errc::width_mismatch, init.session_id});
      return;
    }
    if (config_.execution_ticks > 0) {
      running_ = Running{init, now + config_.execution_ticks};
      return;
    }
    send_report(execute(init), now, out);
  }

  void send_report(Message reply, std::uint64_t now, std::vector<Message>& out) {
    const std::uint64_t sid = std::visit(
        [](const auto& m) -> std::uint64_t {
          if constexpr (requires { m.session_id; }) return m.session_id;
          return 0;
        },
        reply);
    cache_.emplace_back(sid, reply);
    if (cache_.size() > kCacheSize) cache_.pop_front();
    if (config_.report_repeats > 0) {
      repeats_.push_back({reply, config_.report_repeats, now + config_.repeat_interval});
    }
    out.push_back(std::move(reply));
  }

  static constexpr std::size_t kCacheSize = 16;

  AgentConfig config_;
  bool enrolled_ = false;
  bool rejected_ = false;
  std::uint64_t last_hello_ = 0;
  std::size_t executions_ = 0;
  std::optional<Running> running_;
  std::deque<std::pair<std::uint64_t, Message>> cache_;
  std::vector<Repeat> repeats_;
  std::vector<std::string> notes_;
};

}  // namespace lbist::remote
