#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hsphere {

// Input has the wrong shape (mismatched grids, empty sample, ragged rows).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is outside the mathematical domain of an operation (antipodal points,
// zero spectrum, invalid parameter range).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// File or option content failed validation; carries a human-readable location.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solver hit a conditioning limit (near-singular operator).
class ConditioningError : public std::runtime_error {
 public:
  ConditioningError(const std::string& what, double min_eigenvalue)
      : std::runtime_error(what), min_eigenvalue(min_eigenvalue) {}
  double min_eigenvalue = 0.0;
};

// Iterative solver did not reach tolerance; carries the last iterate so
// callers can inspect or retry.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate,
                   double gradient_norm)
      : std::runtime_error(what),
        last_iterate(std::move(last_iterate)),
        gradient_norm(gradient_norm) {}
  std::vector<double> last_iterate;
  double gradient_norm = 0.0;
};

}  // namespace hsphere
