#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lbist/bitvec.hpp"
#include "lbist/dut.hpp"
#include "lbist/error.hpp"
#include "lbist/galois_register.hpp"
#include "lbist/gf2poly.hpp"

namespace lbist {

// Test-initialization parameters for one LBIST run. PRPG, DUT and MISR all
// share one width.
struct LbistConfig {
  Gf2Poly prpg_poly;
  BitVec prpg_seed;
  Gf2Poly misr_poly;
  BitVec misr_init;
  std::size_t pattern_count = 1;

  std::size_t width() const noexcept { return prpg_poly.degree(); }

  LbistConfig with_seed(BitVec seed) const {
    LbistConfig c = *this;
    c.prpg_seed = std::move(seed);
    return c;
  }

  void validate() const {
    if (pattern_count == 0) throw validation_error("pattern count must be >= 1");
    if (prpg_seed.width() != prpg_poly.degree()) {
      throw width_mismatch("PRPG seed", prpg_poly.degree(), prpg_seed.width());
    }
    if (prpg_seed.is_zero()) throw validation_error("PRPG seed must be nonzero");
    if (misr_init.width() != misr_poly.degree()) {
      throw width_mismatch("MISR init", misr_poly.degree(), misr_init.width());
    }
  }

  void validate_for(const Nlfsr& dut) const {
    validate();
    if (dut.width() != prpg_poly.degree()) {
      throw width_mismatch("DUT vs PRPG", prpg_poly.degree(), dut.width());
    }
    if (dut.width() != misr_poly.degree()) {
      throw width_mismatch("DUT vs MISR", misr_poly.degree(), dut.width());
    }
  }
};

// LFSR 1+x+x^2+x^3+x^4 seeded with 1011, MISR 1+x^3+x^4 from 0000, 8 patterns.
inline LbistConfig example_config4() {
  return LbistConfig{Gf2Poly::parse("1+x+x^2+x^3+x^4"), BitVec::from_string("1011"),
                     Gf2Poly::parse("1+x^3+x^4"), BitVec::from_string("0000"), 8};
}

struct LbistCycle {
  BitVec pattern;
  BitVec response;
  BitVec misr;  // MISR state after absorbing `response`
};

inline std::vector<LbistCycle> trace_lbist(const Nlfsr& dut, const LbistConfig& cfg,
                                           const FaultSet& faults = {},
                                           FaultMode mode = FaultMode::capture_only) {
  cfg.validate_for(dut);
  faults.check_width(dut.width());
  std::vector<LbistCycle> trace;
  trace.reserve(cfg.pattern_count);
  GaloisRegister misr(cfg.misr_poly, cfg.misr_init);
  for (auto& pattern : lfsr_patterns(cfg.prpg_poly, cfg.prpg_seed, cfg.pattern_count)) {
    BitVec response = faulty_response(dut, pattern, faults, mode);
    misr = misr.absorb(response);
    trace.push_back({std::move(pattern), std::move(response), misr.state()});
  }
  return trace;
}

inline BitVec run_lbist(const Nlfsr& dut, const LbistConfig& cfg,
                        const FaultSet& faults = {},
                        FaultMode mode = FaultMode::capture_only) {
  cfg.validate_for(dut);
  faults.check_width(dut.width());
  GaloisRegister misr(cfg.misr_poly, cfg.misr_init);
  GaloisRegister prpg(cfg.prpg_poly, cfg.prpg_seed);
  for (std::size_t k = 0; k < cfg.pattern_count; ++k) {
    misr = misr.absorb(faulty_response(dut, prpg.state(), faults, mode));
    prpg = prpg.step();
  }
  return misr.state();
}

inline BitVec golden_signature(const Nlfsr& dut, const LbistConfig& cfg) {
  return run_lbist(dut, cfg, FaultSet{}, FaultMode::capture_only);
}

enum class Outcome { pass, fail };

inline std::string to_string(Outcome o) { return o == Outcome::pass ? "PASS" : "FAIL"; }

struct Verdict {
  Outcome outcome = Outcome::fail;
  BitVec computed_signature;
  BitVec expected_signature;

  bool passed() const noexcept { return outcome == Outcome::pass; }
};

inline Verdict decide(const BitVec& computed, const BitVec& expected) {
  if (computed.width() != expected.width()) {
    throw width_mismatch("signature comparison", expected.width(), computed.width());
  }
  return {computed == expected ? Outcome::pass : Outcome::fail, computed, expected};
}

}  // namespace lbist
