#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lbist/bitvec.hpp"
#include "lbist/engine.hpp"
#include "lbist/error.hpp"

namespace lbist::remote {

// Frame layout:
//   'L' 'B' | version 0x01 | type u8 | payload_len u16 BE | payload
// Integers in payloads are big-endian; bit vectors are packed per BitVec::pack.

inline constexpr std::uint8_t kMagic0 = 0x4C;
inline constexpr std::uint8_t kMagic1 = 0x42;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 6;

class protocol_error : public error {
 public:
  using error::error;
};

enum class MsgType : std::uint8_t {
  hello = 0x01,
  hello_ack = 0x02,
  test_init = 0x10,
  sig_report = 0x11,
  verdict_report = 0x12,
  test_trigger_req = 0x13,
  error = 0x7F,
};

enum class Scenario : std::uint8_t { signature_report = 0, local_verdict = 1 };

inline std::string to_string(Scenario s) {
  return s == Scenario::signature_report ? "SIGNATURE_REPORT" : "LOCAL_VERDICT";
}

// ERROR frame codes.
namespace errc {
inline constexpr std::uint8_t unknown_model = 0x01;
inline constexpr std::uint8_t width_mismatch = 0x02;
inline constexpr std::uint8_t busy = 0x03;
inline constexpr std::uint8_t unknown_session = 0x04;
inline constexpr std::uint8_t unknown_target = 0x05;
inline constexpr std::uint8_t not_enrolled = 0x06;
}  // namespace errc

// Reason codes carried by TEST_TRIGGER_REQ.
namespace reason {
inline constexpr std::uint8_t comm_failure = 0;
inline constexpr std::uint8_t environmental = 1;
inline constexpr std::uint8_t operator_request = 2;
}  // namespace reason

struct Hello {
  std::uint32_t device_id = 0;
  std::uint32_t model_id = 0;
  std::uint8_t width = 0;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct HelloAck {
  std::uint8_t status = 0;
  friend bool operator==(const HelloAck&, const HelloAck&) = default;
};

struct TestInit {
  std::uint64_t session_id = 0;
  Scenario scenario = Scenario::signature_report;
  std::uint32_t pattern_count = 0;
  BitVec seed;
  std::optional<BitVec> expected_signature;  // present iff local_verdict
  friend bool operator==(const TestInit&, const TestInit&) = default;
};

struct SigReport {
  std::uint64_t session_id = 0;
  BitVec signature;
  friend bool operator==(const SigReport&, const SigReport&) = default;
};

struct VerdictReport {
  std::uint64_t session_id = 0;
  Outcome verdict = Outcome::fail;
  friend bool operator==(const VerdictReport&, const VerdictReport&) = default;
};

struct TriggerReq {
  std::uint32_t requester_id = 0;
  std::uint32_t target_id = 0;
  std::uint8_t reason = 0;
  friend bool operator==(const TriggerReq&, const TriggerReq&) = default;
};

struct ErrorMsg {
  std::uint8_t code = 0;
  std::uint64_t session_id = 0;
  friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

using Message =
    std::variant<Hello, HelloAck, TestInit, SigReport, VerdictReport, TriggerReq, ErrorMsg>;

namespace detail {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { be(v, 2); }
  void u32(std::uint32_t v) { be(v, 4); }
  void u64(std::uint64_t v) { be(v, 8); }
  void bits(const BitVec& v) {
    if (v.width() == 0 || v.width() > 255) {
      throw protocol_error("bit vector width must be in 1..255");
    }
    u8(static_cast<std::uint8_t>(v.width()));
    const auto packed = v.pack();
    out_.insert(out_.end(), packed.begin(), packed.end());
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(be(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(be(4)); }
  std::uint64_t u64() { return be(8); }
  BitVec bits() {
    const std::size_t width = u8();
    if (width == 0) throw protocol_error("zero-width bit vector");
    const std::size_t n = (width + 7) / 8;
    need(n);
    auto v = BitVec::unpack(in_.subspan(pos_, n), width);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == in_.size(); }
  void finish() const {
    if (!done()) throw protocol_error("trailing bytes in payload");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw protocol_error("truncated payload");
  }
  std::uint64_t be(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void write_payload(Writer& w, const Hello& m) {
  w.u32(m.device_id);
  w.u32(m.model_id);
  w.u8(m.width);
}
inline void write_payload(Writer& w, const HelloAck& m) { w.u8(m.status); }
inline void write_payload(Writer& w, const TestInit& m) {
  if (m.expected_signature.has_value() != (m.scenario == Scenario::local_verdict)) {
    throw protocol_error("TEST_INIT carries an expected signature iff scenario is LOCAL_VERDICT");
  }
  w.u64(m.session_id);
  w.u8(static_cast<std::uint8_t>(m.scenario));
  w.u32(m.pattern_count);
  w.bits(m.seed);
  if (m.expected_signature) w.bits(*m.expected_signature);
}
inline void write_payload(Writer& w, const SigReport& m) {
  w.u64(m.session_id);
  w.bits(m.signature);
}
inline void write_payload(Writer& w, const VerdictReport& m) {
  w.u64(m.session_id);
  w.u8(m.verdict == Outcome::pass ? 0 : 1);
}
inline void write_payload(Writer& w, const TriggerReq& m) {
  w.u32(m.requester_id);
  w.u32(m.target_id);
  w.u8(m.reason);
}
inline void write_payload(Writer& w, const ErrorMsg& m) {
  w.u8(m.code);
  w.u64(m.session_id);
}

template <class T>
constexpr MsgType type_of();
template <> constexpr MsgType type_of<Hello>() { return MsgType::hello; }
template <> constexpr MsgType type_of<HelloAck>() { return MsgType::hello_ack; }
template <> constexpr MsgType type_of<TestInit>() { return MsgType::test_init; }
template <> constexpr MsgType type_of<SigReport>() { return MsgType::sig_report; }
template <> constexpr MsgType type_of<VerdictReport>() { return MsgType::verdict_report; }
template <> constexpr MsgType type_of<TriggerReq>() { return MsgType::test_trigger_req; }
template <> constexpr MsgType type_of<ErrorMsg>() { return MsgType::error; }

}  // namespace detail

inline MsgType type_of(const Message& m) {
  return std::visit([](const auto& v) { return detail::type_of<std::decay_t<decltype(v)>>(); }, m);
}

inline std::vector<std::uint8_t> encode(const Message& msg) {
  detail::Writer payload;
  std::visit([&](const auto& m) { detail::write_payload(payload, m); }, msg);
  const auto& body = payload.bytes();
  if (body.size() > 0xFFFF) throw protocol_error("payload too large");
  detail::Writer frame;
  frame.u8(kMagic0);
  frame.u8(kMagic1);
  frame.u8(kVersion);
  frame.u8(static_cast<std::uint8_t>(type_of(msg)));
  frame.u16(static_cast<std::uint16_t>(body.size()));
  auto out = std::move(frame.bytes());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline Message decode_payload(std::uint8_t type, std::span<const std::uint8_t> payload) {
  detail::Reader r(payload);
  Message out;
  switch (static_cast<MsgType>(type)) {
    case MsgType::hello: {
      Hello m;
      m.device_id = r.u32();
      m.model_id = r.u32();
      m.width = r.u8();
      out = m;
      break;
    }
    case MsgType::hello_ack:
      out = HelloAck{r.u8()};
      break;
    case MsgType::test_init: {
      TestInit m;
      m.session_id = r.u64();
      const std::uint8_t scenario = r.u8();
      if (scenario > 1) throw protocol_error("unknown scenario " + std::to_string(scenario));
      m.scenario = static_cast<Scenario>(scenario);
      m.pattern_count = r.u32();
      m.seed = r.bits();
      if (m.scenario == Scenario::local_verdict) m.expected_signature = r.bits();
      out = std::move(m);
      break;
    }
    case MsgType::sig_report: {
      SigReport m;
      m.session_id = r.u64();
      m.signature = r.bits();
      out = std::move(m);
      break;
    }
    case MsgType::verdict_report: {
      VerdictReport m;
      m.session_id = r.u64();
      const std::uint8_t v = r.u8();
      if (v > 1) throw protocol_error("verdict must be 0 or 1");
      m.verdict = v == 0 ? Outcome::pass : Outcome::fail;
      out = m;
      break;
    }
    case MsgType::test_trigger_req: {
      TriggerReq m;
      m.requester_id = r.u32();
      m.target_id = r.u32();
      m.reason = r.u8();
      out = m;
      break;
    }
    case MsgType::error: {
      ErrorMsg m;
      m.code = r.u8();
      m.session_id = r.u64();
      out = m;
      break;
    }
    default:
      throw protocol_error("unknown message type 0x" + BitVec::from_uint(type, 8).to_hex());
  }
  r.finish();
  return out;
}

// Total frame size if `buf` starts with a valid header, nullopt if the
// header is incomplete. Throws on a bad magic or version.
inline std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> buf) {
  if (buf.size() >= 1 && buf[0] != kMagic0) throw protocol_error("bad frame magic");
  if (buf.size() >= 2 && buf[1] != kMagic1) throw protocol_error("bad frame magic");
  if (buf.size() >= 3 && buf[2] != kVersion) throw protocol_error("unsupported frame version");
  if (buf.size() < kHeaderSize) return std::nullopt;
  return kHeaderSize + ((std::size_t{buf[4]} << 8) | buf[5]);
}

// Decodes exactly one frame occupying all of `frame`.
inline Message decode(std::span<const std::uint8_t> frame) {
  const auto size = peek_frame_size(frame);
  if (!size) throw protocol_error("truncated frame header");
  if (*size != frame.size()) throw protocol_error("frame length field does not match payload");
  return decode_payload(frame[3], frame.subspan(kHeaderSize));
}

// Reassembles frames from a byte stream.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  std::optional<Message> next() {
    const auto size = peek_frame_size(buf_);
    if (!size || buf_.size() < *size) return std::nullopt;
    Message m = decode(std::span<const std::uint8_t>(buf_.data(), *size));
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(*size));
    return m;
  }

  std::size_t buffered() const noexcept { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

inline std::string describe(const Message& msg) {
  struct V {
    std::string operator()(const Hello& m) const {
      return "HELLO device=" + std::to_string(m.device_id) + " model=" + std::to_string(m.model_id) +
             " width=" + std::to_string(m.width);
    }
    std::string operator()(const HelloAck& m) const {
      return "HELLO_ACK status=" + std::to_string(m.status);
    }
    std::string operator()(const TestInit& m) const {
      std::string s = "TEST_INIT sid=" + std::to_string(m.session_id) + " scenario=" +
                      to_string(m.scenario) + " count=" + std::to_string(m.pattern_count) +
                      " seed=" + m.seed.to_string();
      if (m.expected_signature) s += " expected=" + m.expected_signature->to_string();
      return s;
    }
    std::string operator()(const SigReport& m) const {
      return "SIG_REPORT sid=" + std::to_string(m.session_id) + " signature=" + m.signature.to_string();
    }
    std::string operator()(const VerdictReport& m) const {
      return "VERDICT_REPORT sid=" + std::to_string(m.session_id) + " verdict=" + to_string(m.verdict);
    }
    std::string operator()(const TriggerReq& m) const {
      return "TEST_TRIGGER_REQ requester=" + std::to_string(m.requester_id) +
             " target=" + std::to_string(m.target_id) + " reason=" + std::to_string(m.reason);
    }
    std::string operator()(const ErrorMsg& m) const {
      return "ERROR code=0x" + BitVec::from_uint(m.code, 8).to_hex() +
             " sid=" + std::to_string(m.session_id);
    }
  };
  return std::visit(V{}, msg);
}

}  // namespace lbist::remote
