#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lbist/error.hpp"

namespace lbist {

// Ordered bit sequence b_0..b_{w-1}. Bit 0 is stage 0 (least significant).
// Text form is written most significant first: "b_{w-1} ... b_0", so the
// string "1011" has b_0 = 1, b_1 = 1, b_2 = 0, b_3 = 1.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t width) : bits_(width, 0) {}

  static BitVec from_string(std::string_view text) {
    BitVec v;
    v.bits_.reserve(text.size());
    for (auto it = text.rbegin(); it != text.rend(); ++it) {
      if (*it == '0' || *it == '1') {
        v.bits_.push_back(static_cast<std::uint8_t>(*it - '0'));
      } else if (*it != '_' && *it != ' ') {
        throw parse_error("invalid bit character '" + std::string(1, *it) +
                          "' in \"" + std::string(text) + "\"");
      }
    }
    if (v.bits_.empty()) throw parse_error("empty bit string");
    return v;
  }

  // Low `width` bits of `value`; width <= 64.
  static BitVec from_uint(std::uint64_t value, std::size_t width) {
    if (width > 64) throw validation_error("from_uint supports width <= 64");
    BitVec v(width);
    for (std::size_t i = 0; i < width; ++i) v.bits_[i] = (value >> i) & 1u;
    return v;
  }

  static BitVec unit(std::size_t width) {
    BitVec v(width);
    if (width > 0) v.bits_[0] = 1;
    return v;
  }

  std::size_t width() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  bool at(std::size_t i) const {
    if (i >= bits_.size()) {
      throw validation_error("bit index " + std::to_string(i) +
                             " out of range for width " +
                             std::to_string(bits_.size()));
    }
    return bits_[i] != 0;
  }
  void set(std::size_t i, bool value) { bits_.at(i) = value ? 1 : 0; }

  bool is_zero() const noexcept {
    return std::all_of(bits_.begin(), bits_.end(),
                       [](std::uint8_t b) { return b == 0; });
  }

  std::size_t popcount() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
  }

  BitVec& operator^=(const BitVec& other) {
    if (other.width() != width()) {
      throw width_mismatch("xor", width(), other.width());
    }
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] ^= other.bits_[i];
    return *this;
  }
  friend BitVec operator^(BitVec a, const BitVec& b) { return a ^= b; }

  friend bool operator==(const BitVec&, const BitVec&) = default;
  friend auto operator<=>(const BitVec&, const BitVec&) = default;

  std::uint64_t to_uint() const {
    if (width() > 64) throw validation_error("to_uint supports width <= 64");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width(); ++i) v |= std::uint64_t{bits_[i]} << i;
    return v;
  }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto it = bits_.rbegin(); it != bits_.rend(); ++it) {
      s.push_back(static_cast<char>('0' + *it));
    }
    return s;
  }

  // Lower-case hex of the value, ceil(width/4) digits, most significant first.
  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    const std::size_t nibbles = (width() + 3) / 4;
    std::string s(nibbles, '0');
    for (std::size_t n = 0; n < nibbles; ++n) {
      unsigned v = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t i = n * 4 + b;
        if (i < width() && bits_[i]) v |= 1u << b;
      }
      s[nibbles - 1 - n] = digits[v];
    }
    return s;
  }

  // Bit i goes to byte i/8 at position i%8; pad bits are zero.
  std::vector<std::uint8_t> pack() const {
    std::vector<std::uint8_t> out((width() + 7) / 8, 0);
    for (std::size_t i = 0; i < width(); ++i) {
      if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return out;
  }

  static BitVec unpack(std::span<const std::uint8_t> bytes, std::size_t width) {
    if (bytes.size() != (width + 7) / 8) {
      throw parse_error("packed bit vector of width " + std::to_string(width) +
                        " needs " + std::to_string((width + 7) / 8) +
                        " bytes, got " + std::to_string(bytes.size()));
    }
    BitVec v(width);
    for (std::size_t i = 0; i < width; ++i) {
      v.bits_[i] = (bytes[i / 8] >> (i % 8)) & 1u;
    }
    for (std::size_t i = width; i < bytes.size() * 8; ++i) {
      if ((bytes[i / 8] >> (i % 8)) & 1u) {
        throw parse_error("nonzero pad bit in packed bit vector");
      }
    }
    return v;
  }

 private:
  std::vector<std::uint8_t> bits_;
};

inline std::ostream& operator<<(std::ostream& os, const BitVec& v) {
  return os << v.to_string();
}

}  // namespace lbist
