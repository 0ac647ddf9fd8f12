#pragma once

#include <stdexcept>
#include <string>

namespace fdcov {

// Bad user input, file schema problems, or misuse of a documented contract.
// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: non-convergence, rank deficiency, degenerate estimation.
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested truncation exceeds the numerical rank of an estimated surface.
class TruncationError : public NumericalError {
 public:
  TruncationError(const std::string& msg, int largest_valid_k)
      : NumericalError(msg), largest_valid_k(largest_valid_k) {}
  int largest_valid_k;
};

// Covariance estimation failed (e.g. too many empty grid cells).
class EstimationError : public NumericalError {
 public:
  explicit EstimationError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace fdcov
