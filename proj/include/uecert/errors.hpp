#pragma once

#include <stdexcept>
#include <string>

namespace uecert {

/// Base class of all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value (CLI exit code 2).
struct ParameterError : Error {
    using Error::Error;
};

/// Numerical failure: non-finite state, collapsed factorization (CLI exit code 3).
struct NumericalError : Error {
    using Error::Error;
};

/// A Gram volume is zero or negative within tolerance. Distinct from a generic
/// numerical failure so callers can count degenerate samples separately.
struct DegenerateVolumeError : NumericalError {
    using NumericalError::NumericalError;
};

/// V(A') is too close to singular to recover the log-translation.
struct IllConditionedGeneratorError : NumericalError {
    using NumericalError::NumericalError;
};

/// A discretization or sweep budget was exceeded.
struct BudgetError : Error {
    using Error::Error;
};

} // namespace uecert
