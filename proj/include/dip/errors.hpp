#pragma once

#include <stdexcept>
#include <string>

namespace dip {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value (bad dimension, unknown name, ...).
/// The message names the offending field.
struct ConfigError : Error {
    using Error::Error;
};

/// A user-supplied function produced a non-finite value.
struct EvaluationError : Error {
    using Error::Error;
};

/// A numerical routine (eigensolver, quadrature) failed to converge.
struct NumericalError : Error {
    using Error::Error;
};

/// The forward operator has no nonzero singular value.
struct DegenerateOperatorError : Error {
    using Error::Error;
};

/// Not enough valid samples for a statistical fit.
struct InsufficientDataError : Error {
    using Error::Error;
};

/// A grid run would exceed the configured work budget. Carries the estimate.
struct BudgetError : Error {
    BudgetError(const std::string& msg, long long estimated, long long budget)
        : Error(msg), estimated_work(estimated), budget(budget) {}
    long long estimated_work;
    long long budget;
};

}  // namespace dip
