#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lbist/error.hpp"

namespace lbist {

// Connection polynomial over GF(2). coeff(j) is the coefficient of x^j.
// A usable connection polynomial has c_0 = c_n = 1 and degree n >= 2.
class Gf2Poly {
 public:
  explicit Gf2Poly(std::vector<std::uint8_t> coeffs) : coeffs_(std::move(coeffs)) {
    for (auto& c : coeffs_) c = c ? 1 : 0;
    validate();
  }

  // Parses sums of "1", "x" and "x^k" joined by '+'. Whitespace is ignored.
  static Gf2Poly parse(std::string_view text) {
    std::string s;
    for (char ch : text) {
      if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
    }
    if (s.empty()) throw parse_error("empty polynomial");

    std::vector<std::uint8_t> coeffs;
    std::size_t pos = 0;
    while (pos <= s.size()) {
      const std::size_t end = std::min(s.find('+', pos), s.size());
      const std::string term = s.substr(pos, end - pos);
      const std::size_t exp = parse_term(term, text);
      if (coeffs.size() <= exp) coeffs.resize(exp + 1, 0);
      if (coeffs[exp]) {
        throw parse_error("duplicate exponent " + std::to_string(exp) +
                          " in \"" + std::string(text) + "\"");
      }
      coeffs[exp] = 1;
      pos = end + 1;
    }
    return Gf2Poly(std::move(coeffs));
  }

  std::size_t degree() const noexcept { return coeffs_.size() - 1; }
  bool coeff(std::size_t j) const { return j < coeffs_.size() && coeffs_[j]; }
  const std::vector<std::uint8_t>& coeffs() const noexcept { return coeffs_; }

  // Canonical text, ascending exponents: "1+x+x^3".
  std::string to_string() const {
    std::string out;
    for (std::size_t j = 0; j < coeffs_.size(); ++j) {
      if (!coeffs_[j]) continue;
      if (!out.empty()) out += '+';
      if (j == 0) {
        out += '1';
      } else if (j == 1) {
        out += 'x';
      } else {
        out += "x^" + std::to_string(j);
      }
    }
    return out;
  }

  friend bool operator==(const Gf2Poly&, const Gf2Poly&) = default;

 private:
  static std::size_t parse_term(const std::string& term, std::string_view text) {
    auto bad = [&] {
      return parse_error("malformed term \"" + term + "\" in \"" +
                         std::string(text) + "\"");
    };
    if (term == "1") return 0;
    if (term == "x") return 1;
    if (term.size() > 2 && term[0] == 'x' && term[1] == '^') {
      std::size_t exp = 0;
      for (std::size_t i = 2; i < term.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(term[i]))) throw bad();
        exp = exp * 10 + static_cast<std::size_t>(term[i] - '0');
        if (exp > 4096) throw bad();
      }
      return exp;
    }
    throw bad();
  }

  void validate() const {
    if (coeffs_.size() < 3) {
      throw validation_error("connection polynomial degree must be >= 2");
    }
    if (!coeffs_.front()) {
      throw validation_error("connection polynomial needs c_0 = 1");
    }
    if (!coeffs_.back()) {
      throw validation_error("connection polynomial needs c_n = 1");
    }
  }

  std::vector<std::uint8_t> coeffs_;
};

}  // namespace lbist
