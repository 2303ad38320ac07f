#pragma once

#include <cstdint>
#include <numeric>

#include "lbist/bitvec.hpp"
#include "lbist/error.hpp"
#include "lbist/keyed.hpp"

namespace lbist::remote {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Per-device affine permutation of the nonzero width-bit values.
//
// With P = 2^width - 1, counter c >= 1 maps to
//   v = ((c - 1) mod P) * mult + offset  (mod P), plus 1
// where offset and mult (coprime to P) come from splitmix64 of the server
// secret and device id. Any P consecutive counters therefore visit every
// nonzero seed exactly once.
class SeedSchedule {
 public:
  SeedSchedule(std::uint64_t secret, std::uint32_t device_id, std::size_t width)
      : width_(width) {
    if (width == 0 || width > 62) throw validation_error("seed width must be in 1..62");
    period_ = (std::uint64_t{1} << width) - 1;
    const std::uint64_t h = splitmix64(secret ^ splitmix64(device_id));
    offset_ = h % period_;
    mult_ = 1 + splitmix64(h) % period_;
    while (std::gcd(mult_, period_) != 1) mult_ = mult_ % period_ + 1;
  }

  std::uint64_t period() const noexcept { return period_; }

  BitVec seed_for(std::uint64_t counter) const {
    if (counter == 0) throw validation_error("seed counters start at 1");
    const std::uint64_t idx = (counter - 1) % period_;
    const auto mixed = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(idx) * mult_ + offset_) % period_);
    return derive_seed(TestKey{BitVec::from_uint(mixed + 1, width_)}, width_);
  }

  // True when `counter` starts a new pass over the seed space.
  bool wraps_at(std::uint64_t counter) const noexcept {
    return counter > 1 && (counter - 1) % period_ == 0;
  }

 private:
  std::size_t width_;
  std::uint64_t period_ = 1;
  std::uint64_t offset_ = 0;
  std::uint64_t mult_ = 1;
};

inline BitVec fresh_seed(std::uint64_t secret, std::uint32_t device_id, std::size_t width,
                         std::uint64_t counter) {
  return SeedSchedule(secret, device_id, width).seed_for(counter);
}

}  // namespace lbist::remote
