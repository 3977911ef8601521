#pragma once

#include <stdexcept>
#include <string>

namespace pgpois {

/// Invalid arguments or configuration (CLI exit code 2).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factorization or estimation failure (CLI exit code 4).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Importance weights degenerated to zero.
class EstimationError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace pgpois
