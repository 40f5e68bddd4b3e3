#pragma once

#include <stdexcept>
#include <string>

namespace spinlab {

/// Invalid input: a model, grid or run parameter violates its precondition.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. |x| > 1).
class DomainError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// A computation finished but its output violates a numerical invariant,
/// or a quadrature/table normalization went out of tolerance.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Process exit codes used by the command line tool.
enum class ExitCode : int {
    ok = 0,
    config_error = 1,
    numerical_failure = 2,
    acceptance_failure = 3,
};

}  // namespace spinlab
