#pragma once

#include <stdexcept>
#include <string>

namespace mwlab {

/// Invalid experiment parameters (epsilon out of range, bad flags). CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Index/level outside the available range (grid level mismatch, n > depth).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Caller violated a documented precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A computation would exceed the configured resource budget. CLI exit code 3.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Attempt to invert a singular matrix; carries the offending determinant.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double det)
      : std::runtime_error(what), det_(det) {}
  double det() const noexcept { return det_; }

 private:
  double det_;
};

}  // namespace mwlab
