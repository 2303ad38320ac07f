#pragma once

#include <stdexcept>
#include <string>

namespace lbist {

// Base class for every error raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed textual input (polynomials, bit strings, DUT models, fault lists).
class parse_error : public error {
 public:
  using error::error;
};

// Well-formed input that violates a domain invariant.
class validation_error : public error {
 public:
  using error::error;
};

class width_mismatch : public error {
 public:
  width_mismatch(const std::string& what, std::size_t expected, std::size_t got)
      : error(what + ": expected width " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class storage_error : public error {
 public:
  using error::error;
};

}  // namespace lbist
