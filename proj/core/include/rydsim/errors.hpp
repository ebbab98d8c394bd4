#pragma once

#include <stdexcept>
#include <string>

namespace rydsim {

/// Base class for all rydsim-specific failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure at runtime: non-convergence, out-of-model results.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A state or operator drifted outside its mathematical invariants
/// (norm, trace, hermiticity, positivity).
class InvariantViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed or inconsistent configuration input. Carries enough context
/// (field path, line) to point the user at the offending entry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rydsim
