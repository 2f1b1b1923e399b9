#pragma once

#include <stdexcept>
#include <string>

namespace trajod {

/// Bad configuration: unknown key, invalid value, violated precondition.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input data (files, streams).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: divergence, non-finite loss, shape mismatch.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace trajod
