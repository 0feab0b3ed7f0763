#pragma once

#include <stdexcept>

namespace ofpca {

// Error taxonomy shared across modules. The CLI maps these onto exit codes:
// ConfigError -> 2, DataError -> 3, NumericalError/StateError -> 4.

/// Invalid configuration or argument misuse.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed, inconsistent, or out-of-domain input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Factorization or iteration failure.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Retraction step too large; callers may shrink the step and retry.
struct StepError : NumericalError {
  using NumericalError::NumericalError;
};

/// Operation invoked from an invalid state (e.g. infeasible base point).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ofpca
