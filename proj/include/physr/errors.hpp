#pragma once

#include <stdexcept>
#include <string>

namespace physr {

// Invalid configuration: bad CLI flags, malformed config files, out-of-range
// hyperparameters. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid data: unreadable/corrupt containers, shape mismatches, non-finite
// payloads, manifest inconsistencies. CLI maps this to exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime: solver blow-up, non-finite loss, divergence.
// CLI maps this to exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace physr
