#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Invalid user-facing configuration (bad pattern parameters, exhausted replay
// file, malformed JSON, ...). The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API contract violation by the caller (out-of-order rounds, querying history
// that was never recorded). Indicates a harness bug, not a user mistake.
class UsageError : public std::logic_error {
public:
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// The iterate blew up (guard: ||x|| > 1e12 or non-finite). CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite inputs to numeric kernels.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// File I/O failure; message carries the offending path.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fedsim
