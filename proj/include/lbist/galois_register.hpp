#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lbist/bitvec.hpp"
#include "lbist/error.hpp"
#include "lbist/gf2poly.hpp"

namespace lbist {

// Galois-configuration shift register used both as PRPG (autonomous LFSR)
// and as MISR (parallel-input compactor).
//
// One step with feedback bit b = x_0:
//   x'_{n-1} = b
//   x'_i     = x_{i+1} ^ (c_{n-1-i} & b)      for i in 0..n-2
//
// This orientation is the one that reproduces the worked 4-bit LBIST example
// (LFSR 1+x+x^2+x^3+x^4 from 1011, MISR 1+x^3+x^4 from 0000) bit for bit.
// It is the usual right-shifting Galois register for the reciprocal
// polynomial.
class GaloisRegister {
 public:
  GaloisRegister(Gf2Poly poly, BitVec state)
      : poly_(std::move(poly)), state_(std::move(state)) {
    if (state_.width() != poly_.degree()) {
      throw width_mismatch("register state", poly_.degree(), state_.width());
    }
  }

  // Register of the polynomial's width with an all-zero state.
  explicit GaloisRegister(Gf2Poly poly)
      : GaloisRegister(poly, BitVec(poly.degree())) {}

  const Gf2Poly& poly() const noexcept { return poly_; }
  const BitVec& state() const noexcept { return state_; }
  std::size_t width() const noexcept { return state_.width(); }

  GaloisRegister step() const {
    const std::size_t n = width();
    const bool b = state_[0];
    BitVec next(n);
    next.set(n - 1, b);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      next.set(i, state_[i + 1] != (poly_.coeff(n - 1 - i) && b));
    }
    return GaloisRegister(poly_, std::move(next), unchecked{});
  }

  // MISR clock: step, then XOR the response word into every stage.
  GaloisRegister absorb(const BitVec& response) const {
    if (response.width() != width()) {
      throw width_mismatch("MISR response", width(), response.width());
    }
    GaloisRegister next = step();
    next.state_ ^= response;
    return next;
  }

  friend bool operator==(const GaloisRegister&, const GaloisRegister&) = default;

 private:
  struct unchecked {};
  GaloisRegister(Gf2Poly poly, BitVec state, unchecked)
      : poly_(std::move(poly)), state_(std::move(state)) {}

  Gf2Poly poly_;
  BitVec state_;
};

inline GaloisRegister register_step(const GaloisRegister& reg) { return reg.step(); }

inline GaloisRegister misr_absorb(const GaloisRegister& reg, const BitVec& response) {
  return reg.absorb(response);
}

// PRPG output: the state before each step, starting with the seed itself.
inline std::vector<BitVec> lfsr_patterns(const Gf2Poly& poly, const BitVec& seed,
                                         std::size_t count) {
  if (seed.width() != poly.degree()) {
    throw width_mismatch("LFSR seed", poly.degree(), seed.width());
  }
  if (seed.is_zero()) throw validation_error("LFSR seed must be nonzero");
  if (count == 0) throw validation_error("pattern count must be >= 1");

  std::vector<BitVec> out;
  out.reserve(count);
  GaloisRegister reg(poly, seed);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(reg.state());
    if (k + 1 < count) reg = reg.step();
  }
  return out;
}

inline BitVec misr_signature(const Gf2Poly& poly, const BitVec& init,
                             std::span<const BitVec> responses) {
  if (responses.empty()) throw validation_error("empty response sequence");
  GaloisRegister reg(poly, init);
  for (const auto& r : responses) reg = reg.absorb(r);
  return reg.state();
}

// Smallest p >= 1 with step^p(seed) == seed.
inline std::uint64_t register_period(const Gf2Poly& poly, const BitVec& seed) {
  if (seed.is_zero()) throw validation_error("period seed must be nonzero");
  if (poly.degree() > 40) throw validation_error("period search limited to degree <= 40");
  const GaloisRegister start(poly, seed);
  const std::uint64_t bound = std::uint64_t{1} << poly.degree();
  GaloisRegister reg = start.step();
  for (std::uint64_t p = 1; p <= bound; ++p) {
    if (reg.state() == seed) return p;
    reg = reg.step();
  }
  // The step is a bijection on states, so every orbit is a pure cycle.
  throw error("register period not found within 2^n steps");
}

}  // namespace lbist
