#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lbist/bitvec.hpp"
#include "lbist/dut.hpp"
#include "lbist/engine.hpp"
#include "lbist/error.hpp"
#include "lbist/gf2poly.hpp"

namespace lbist {

class search_space_exceeded : public error {
 public:
  using error::error;
};

// The value 1 / 2^exponent.
struct Dyadic {
  unsigned exponent = 0;

  double value() const { return 1.0 / static_cast<double>(std::uint64_t{1} << std::min(exponent, 63u)); }

  std::string to_string() const {
    if (exponent < 64) return "1/" + std::to_string(std::uint64_t{1} << exponent);
    return "1/2^" + std::to_string(exponent);
  }

  friend bool operator==(const Dyadic&, const Dyadic&) = default;
};

// Chance of guessing the output of a width-n generator with k stages fixed.
inline Dyadic guess_probability(std::size_t dut_width, std::size_t fixed_stages) {
  if (fixed_stages > dut_width) throw validation_error("more fixed stages than DUT width");
  return Dyadic{static_cast<unsigned>(dut_width - fixed_stages)};
}

// Average number of simulated Trojan candidates before one aliases with an
// n-bit compactor: 2^(n-1).
inline std::uint64_t expected_trials(std::size_t misr_width) {
  if (misr_width == 0 || misr_width > 64) throw validation_error("MISR width must be in 1..64");
  return std::uint64_t{1} << (misr_width - 1);
}

struct AttackConstraints {
  std::vector<std::size_t> candidate_stages;
  std::size_t max_faults = 1;
  FaultMode mode = FaultMode::capture_only;

  static AttackConstraints all_stages(std::size_t width, std::size_t max_faults,
                                      FaultMode mode = FaultMode::capture_only) {
    AttackConstraints c;
    c.candidate_stages.resize(width);
    std::iota(c.candidate_stages.begin(), c.candidate_stages.end(), std::size_t{0});
    c.max_faults = max_faults;
    c.mode = mode;
    return c;
  }
};

struct AttackOptions {
  std::uint64_t max_assignments = 1'000'000;
  unsigned threads = 1;
};

struct AttackReport {
  BitVec golden;
  std::size_t dut_width = 0;
  std::vector<FaultSet> aliasing_sets;
  std::uint64_t trials_simulated = 0;
  // 1-based position of the first aliasing assignment in search order; 0 if none.
  std::uint64_t first_hit_trial = 0;

  Dyadic guess_probability_for(const FaultSet& set) const {
    return lbist::guess_probability(dut_width, set.size());
  }
};

// Sum over j = 1..max_faults of C(m, j) * 2^j, saturating at UINT64_MAX.
inline std::uint64_t fault_space_size(std::size_t candidates, std::size_t max_faults) {
  constexpr auto sat = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  std::uint64_t binom = 1;  // C(m, j)
  for (std::size_t j = 1; j <= std::min(max_faults, candidates); ++j) {
    binom = static_cast<std::uint64_t>(
        static_cast<unsigned __int128>(binom) * (candidates - j + 1) / j);
    if (j >= 64) return sat;
    const unsigned __int128 term = static_cast<unsigned __int128>(binom) << j;
    if (term > sat - total) return sat;
    total += static_cast<std::uint64_t>(term);
  }
  return total;
}

namespace detail {

inline void collect_fault_sets(const std::vector<std::size_t>& stages, std::size_t size,
                               std::vector<FaultSet>& out) {
  std::vector<std::size_t> pick(size);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  const std::size_t m = stages.size();
  while (true) {
    for (std::uint64_t values = 0; values < (std::uint64_t{1} << size); ++values) {
      FaultSet set;
      for (std::size_t k = 0; k < size; ++k) {
        set.add({stages[pick[k]], ((values >> (size - 1 - k)) & 1u) != 0});
      }
      out.push_back(std::move(set));
    }
    // next combination
    std::size_t k = size;
    while (k > 0 && pick[k - 1] == m - size + k - 1) --k;
    if (k == 0) break;
    ++pick[k - 1];
    for (std::size_t r = k; r < size; ++r) pick[r] = pick[r - 1] + 1;
  }
}

}  // namespace detail

// Every fault set of 1..max_faults stuck-at faults over the candidate stages,
// both polarities, ordered by fault count and then by (stage, value) sequence.
inline std::vector<FaultSet> enumerate_fault_sets(const AttackConstraints& constraints) {
  std::vector<std::size_t> stages = constraints.candidate_stages;
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  std::vector<FaultSet> out;
  for (std::size_t j = 1; j <= std::min(constraints.max_faults, stages.size()); ++j) {
    const std::size_t first = out.size();
    detail::collect_fault_sets(stages, j, out);
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
  }
  return out;
}

inline AttackReport enumerate_aliasing_faults(const Nlfsr& dut, const LbistConfig& cfg,
                                              const AttackConstraints& constraints,
                                              const AttackOptions& options = {}) {
  cfg.validate_for(dut);
  std::set<std::size_t> unique(constraints.candidate_stages.begin(),
                               constraints.candidate_stages.end());
  if (!unique.empty() && *unique.rbegin() >= dut.width()) {
    throw validation_error("candidate stage " + std::to_string(*unique.rbegin()) +
                           " outside DUT width " + std::to_string(dut.width()));
  }
  if (constraints.max_faults > unique.size() && !unique.empty()) {
    throw validation_error("max_faults exceeds the number of candidate stages");
  }
  const std::uint64_t space = fault_space_size(unique.size(), constraints.max_faults);
  if (space > options.max_assignments) {
    throw search_space_exceeded("fault space of " + std::to_string(space) +
                                " assignments exceeds cap " +
                                std::to_string(options.max_assignments));
  }

  AttackReport report;
  report.dut_width = dut.width();
  report.golden = golden_signature(dut, cfg);
  const std::vector<FaultSet> candidates = enumerate_fault_sets(constraints);
  report.trials_simulated = candidates.size();

  std::vector<std::uint8_t> hit(candidates.size(), 0);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      hit[i] = run_lbist(dut, cfg, candidates[i], constraints.mode) == report.golden;
    }
  };
  const std::size_t threads =
      std::max<std::size_t>(1, std::min<std::size_t>(options.threads, candidates.size()));
  if (threads == 1) {
    worker(0, candidates.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (candidates.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(candidates.size(), b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
  }

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!hit[i]) continue;
    if (report.first_hit_trial == 0) report.first_hit_trial = i + 1;
    report.aliasing_sets.push_back(candidates[i]);
  }
  return report;
}

// Exact count of error streams e in ({0,1}^n)^L that compact to zero from
// a zero MISR.
struct AliasingFraction {
  std::uint64_t aliasing = 0;
  std::uint64_t total = 0;

  bool equals(std::uint64_t num, std::uint64_t den) const {
    return static_cast<unsigned __int128>(aliasing) * den ==
           static_cast<unsigned __int128>(num) * total;
  }
  double value() const { return static_cast<double>(aliasing) / static_cast<double>(total); }
};

inline AliasingFraction aliasing_fraction_exhaustive(const Gf2Poly& misr_poly,
                                                     std::size_t stream_length) {
  const std::size_t n = misr_poly.degree();
  if (stream_length == 0) throw validation_error("stream length must be >= 1");
  if (n * stream_length > 24) {
    throw search_space_exceeded("n * L = " + std::to_string(n * stream_length) +
                                " exceeds the exhaustive cap of 24");
  }
  const std::uint64_t total = std::uint64_t{1} << (n * stream_length);
  const std::uint64_t mask = (std::uint64_t{1} << n) - 1;
  AliasingFraction f{0, total};
  std::vector<BitVec> stream(stream_length);
  for (std::uint64_t code = 0; code < total; ++code) {
    for (std::size_t k = 0; k < stream_length; ++k) {
      stream[k] = BitVec::from_uint((code >> (k * n)) & mask, n);
    }
    if (misr_signature(misr_poly, BitVec(n), stream).is_zero()) ++f.aliasing;
  }
  return f;
}

inline std::string render_report_table(const AttackReport& r) {
  std::ostringstream os;
  os << "golden signature " << r.golden << "\n"
     << "trials simulated " << r.trials_simulated << "\n"
     << "aliasing sets    " << r.aliasing_sets.size() << "\n";
  if (r.aliasing_sets.empty()) return os.str();
  os << "\n" << "fault set             signature  guess probability\n";
  for (const auto& s : r.aliasing_sets) {
    std::string f = s.to_string();
    f.resize(std::max<std::size_t>(f.size(), 22), ' ');
    std::string sig = r.golden.to_string();
    sig.resize(std::max<std::size_t>(sig.size(), 11), ' ');
    os << f << sig << r.guess_probability_for(s).to_string() << "\n";
  }
  return os.str();
}

inline std::string render_report_lines(const AttackReport& r) {
  std::ostringstream os;
  os << "golden=" << r.golden << " trials=" << r.trials_simulated
     << " aliasing=" << r.aliasing_sets.size() << " first_hit=" << r.first_hit_trial << "\n";
  for (const auto& s : r.aliasing_sets) {
    os << "alias faults=" << s.to_string() << " signature=" << r.golden
       << " guess=" << r.guess_probability_for(s).to_string() << "\n";
  }
  return os.str();
}

}  // namespace lbist
