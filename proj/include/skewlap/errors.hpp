#pragma once

#include <stdexcept>
#include <string>

namespace skewlap {

// Bad arguments or violated preconditions (CLI exit code 2).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failure at runtime (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPositiveDefiniteError : NumericalError {
  NotPositiveDefiniteError(const std::string& what, double pivot)
      : NumericalError(what), smallest_pivot(pivot) {}
  double smallest_pivot;
};

struct UnsupportedRepresentationError : ArgumentError {
  using ArgumentError::ArgumentError;
};

}  // namespace skewlap
