#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lbist/bitvec.hpp"
#include "lbist/error.hpp"

namespace lbist {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, end == std::string_view::npos ? end : end - pos)));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

inline std::size_t parse_index(std::string_view digits, std::string_view context) {
  if (digits.empty() || digits.size() > 6) {
    throw parse_error("bad index in \"" + std::string(context) + "\"");
  }
  std::size_t v = 0;
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw parse_error("bad index in \"" + std::string(context) + "\"");
    }
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

}  // namespace detail

// Product of state variables; the empty monomial is the constant 1.
using Monomial = std::vector<std::size_t>;

// Boolean function in algebraic normal form: XOR of AND-monomials.
class AnfFunction {
 public:
  AnfFunction() = default;

  static AnfFunction of(std::vector<Monomial> terms) {
    AnfFunction f;
    for (auto& t : terms) f.add_term(std::move(t));
    return f;
  }

  // "x2 + x0*x1", "1", "0" (the empty function).
  static AnfFunction parse(std::string_view text) {
    const std::string body = detail::trim(text);
    if (body.empty()) throw parse_error("empty ANF expression");
    AnfFunction f;
    if (body == "0") return f;
    for (const auto& term : detail::split(body, '+')) {
      if (term.empty()) throw parse_error("empty term in \"" + body + "\"");
      Monomial m;
      if (term != "1") {
        for (const auto& factor : detail::split(term, '*')) {
          if (factor.size() < 2 || factor[0] != 'x') {
            throw parse_error("malformed factor \"" + factor + "\" in \"" + body + "\"");
          }
          m.push_back(detail::parse_index(std::string_view(factor).substr(1), body));
        }
      }
      f.add_term(std::move(m));
    }
    return f;
  }

  const std::vector<Monomial>& terms() const noexcept { return terms_; }

  std::size_t max_index() const noexcept {
    std::size_t hi = 0;
    for (const auto& t : terms_) {
      for (auto i : t) hi = std::max(hi, i + 1);
    }
    return hi;  // one past the largest referenced index
  }

  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& t : terms_) {
      if (!out.empty()) out += " + ";
      if (t.empty()) {
        out += '1';
        continue;
      }
      for (std::size_t k = 0; k < t.size(); ++k) {
        if (k) out += '*';
        out += 'x' + std::to_string(t[k]);
      }
    }
    return out;
  }

  friend bool operator==(const AnfFunction&, const AnfFunction&) = default;

 private:
  void add_term(Monomial m) {
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
    if (std::find(terms_.begin(), terms_.end(), m) != terms_.end()) {
      throw validation_error("duplicate monomial in ANF function");
    }
    terms_.push_back(std::move(m));
  }

  std::vector<Monomial> terms_;
};

inline bool anf_eval(const AnfFunction& f, const BitVec& state) {
  bool acc = false;
  for (const auto& term : f.terms()) {
    bool prod = true;
    for (auto i : term) prod = prod && state.at(i);
    acc = acc != prod;
  }
  return acc;
}

// One feedback function per stage; all stages update simultaneously from the
// current state.
class Nlfsr {
 public:
  explicit Nlfsr(std::vector<AnfFunction> feedbacks) : feedbacks_(std::move(feedbacks)) {
    if (feedbacks_.empty()) throw validation_error("NLFSR needs at least one stage");
    for (std::size_t i = 0; i < feedbacks_.size(); ++i) {
      if (feedbacks_[i].max_index() > feedbacks_.size()) {
        throw validation_error("feedback f_" + std::to_string(i) +
                               " references a stage beyond width " +
                               std::to_string(feedbacks_.size()));
      }
    }
  }

  std::size_t width() const noexcept { return feedbacks_.size(); }
  const std::vector<AnfFunction>& feedbacks() const noexcept { return feedbacks_; }

  friend bool operator==(const Nlfsr&, const Nlfsr&) = default;

 private:
  std::vector<AnfFunction> feedbacks_;
};

inline BitVec nlfsr_next(const Nlfsr& dut, const BitVec& state) {
  if (state.width() != dut.width()) {
    throw width_mismatch("NLFSR state", dut.width(), state.width());
  }
  BitVec next(dut.width());
  for (std::size_t i = 0; i < dut.width(); ++i) {
    next.set(i, anf_eval(dut.feedbacks()[i], state));
  }
  return next;
}

// The 4-stage example RNG:
//   f_0 = x_1, f_1 = x_2 ^ x_0 x_1, f_2 = x_3 ^ x_0 x_1, f_3 = x_0 ^ x_1
inline Nlfsr example_nlfsr4() {
  return Nlfsr({AnfFunction::of({{1}}), AnfFunction::of({{2}, {0, 1}}),
                AnfFunction::of({{3}, {0, 1}}), AnfFunction::of({{0}, {1}})});
}

// DUT model text:
//
//   # comment
//   width 4
//   f0 = x1
//   f1 = x2 + x0*x1
//   ...
//
// The "fK =" prefix is optional; expressions are taken in order f_0 first.
inline Nlfsr parse_dut_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t width = 0;
  bool have_width = false;
  std::vector<AnfFunction> feedbacks;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string body = detail::trim(line);
    if (body.empty()) continue;
    if (!have_width) {
      if (body.rfind("width", 0) != 0) {
        throw parse_error("line " + std::to_string(lineno) + ": expected \"width N\"");
      }
      width = detail::parse_index(detail::trim(std::string_view(body).substr(5)), body);
      if (width == 0) throw validation_error("DUT width must be >= 1");
      have_width = true;
      continue;
    }
    if (auto eq = body.find('='); eq != std::string::npos) {
      const std::string lhs = detail::trim(std::string_view(body).substr(0, eq));
      if (lhs.size() < 2 || lhs[0] != 'f') {
        throw parse_error("line " + std::to_string(lineno) + ": bad feedback label \"" + lhs + "\"");
      }
      if (detail::parse_index(std::string_view(lhs).substr(1), body) != feedbacks.size()) {
        throw parse_error("line " + std::to_string(lineno) + ": feedbacks must be listed f0 first, in order");
      }
      body = detail::trim(std::string_view(body).substr(eq + 1));
    }
    feedbacks.push_back(AnfFunction::parse(body));
  }
  if (!have_width) throw parse_error("DUT model has no width line");
  if (feedbacks.size() != width) {
    throw validation_error("DUT model declares width " + std::to_string(width) +
                           " but lists " + std::to_string(feedbacks.size()) +
                           " feedback functions");
  }
  return Nlfsr(std::move(feedbacks));
}

inline std::string render_dut_model(const Nlfsr& dut) {
  std::string out = "width " + std::to_string(dut.width()) + "\n";
  for (std::size_t i = 0; i < dut.width(); ++i) {
    out += "f" + std::to_string(i) + " = " + dut.feedbacks()[i].to_string() + "\n";
  }
  return out;
}

inline Nlfsr load_dut_model(const std::string& path) {
  if (path == "builtin:nlfsr4") return example_nlfsr4();
  std::ifstream in(path);
  if (!in) throw storage_error("cannot open DUT model " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dut_model(buf.str());
}

struct StuckFault {
  std::size_t stage = 0;
  bool value = false;
  friend auto operator<=>(const StuckFault&, const StuckFault&) = default;
};

// Stuck-at faults on DUT flip-flops, at most one per stage.
class FaultSet {
 public:
  FaultSet() = default;
  FaultSet(std::initializer_list<StuckFault> faults) {
    for (const auto& f : faults) add(f);
  }

  void add(StuckFault f) {
    if (!by_stage_.emplace(f.stage, f.value).second) {
      throw validation_error("stage " + std::to_string(f.stage) + " already has a fault");
    }
  }

  bool empty() const noexcept { return by_stage_.empty(); }
  std::size_t size() const noexcept { return by_stage_.size(); }

  std::vector<StuckFault> faults() const {
    std::vector<StuckFault> out;
    for (auto [s, v] : by_stage_) out.push_back({s, v});
    return out;
  }

  void apply(BitVec& state) const {
    for (auto [s, v] : by_stage_) state.set(s, v);
  }

  void check_width(std::size_t width) const {
    if (!by_stage_.empty() && by_stage_.rbegin()->first >= width) {
      throw validation_error("fault on stage " + std::to_string(by_stage_.rbegin()->first) +
                             " but DUT width is " + std::to_string(width));
    }
  }

  // "s1:=0,s3:=1"; empty text is the empty set.
  static FaultSet parse(std::string_view text) {
    FaultSet set;
    const std::string body = detail::trim(text);
    if (body.empty() || body == "none") return set;
    for (const auto& item : detail::split(body, ',')) {
      const auto op = item.find(":=");
      if (item.size() < 2 || item[0] != 's' || op == std::string::npos) {
        throw parse_error("malformed fault \"" + item + "\"");
      }
      const std::size_t stage =
          detail::parse_index(detail::trim(std::string_view(item).substr(1, op - 1)), item);
      const std::string val = detail::trim(std::string_view(item).substr(op + 2));
      if (val != "0" && val != "1") throw parse_error("stuck value must be 0 or 1 in \"" + item + "\"");
      set.add({stage, val == "1"});
    }
    return set;
  }

  std::string to_string() const {
    std::string out;
    for (auto [s, v] : by_stage_) {
      if (!out.empty()) out += ',';
      out += "s" + std::to_string(s) + ":=" + (v ? "1" : "0");
    }
    return out;
  }

  friend bool operator==(const FaultSet&, const FaultSet&) = default;

  // Orders by the (stage, value) sequence.
  friend bool operator<(const FaultSet& a, const FaultSet& b) {
    return std::lexicographical_compare(a.by_stage_.begin(), a.by_stage_.end(),
                                        b.by_stage_.begin(), b.by_stage_.end());
  }

 private:
  std::map<std::size_t, bool> by_stage_;
};

// Where a stuck flip-flop is forced.
//   capture_only:     feedbacks read the loaded pattern; the stuck value
//                     overrides the captured next state. Matches the worked
//                     Trojan example.
//   read_and_capture: the stuck value is also seen by the feedback reads.
enum class FaultMode { capture_only, read_and_capture };

inline std::string to_string(FaultMode m) {
  return m == FaultMode::capture_only ? "capture-only" : "read-and-capture";
}

inline FaultMode parse_fault_mode(std::string_view s) {
  if (s == "capture-only" || s == "capture_only" || s == "capture") return FaultMode::capture_only;
  if (s == "read-and-capture" || s == "read_and_capture" || s == "read") {
    return FaultMode::read_and_capture;
  }
  throw parse_error("unknown fault mode \"" + std::string(s) + "\"");
}

inline BitVec faulty_response(const Nlfsr& dut, const BitVec& pattern,
                              const FaultSet& faults, FaultMode mode) {
  if (pattern.width() != dut.width()) {
    throw width_mismatch("DUT pattern", dut.width(), pattern.width());
  }
  faults.check_width(dut.width());
  BitVec next;
  if (mode == FaultMode::read_and_capture) {
    BitVec loaded = pattern;
    faults.apply(loaded);
    next = nlfsr_next(dut, loaded);
  } else {
    next = nlfsr_next(dut, pattern);
  }
  faults.apply(next);
  return next;
}

}  // namespace lbist
