#pragma once

#include <stdexcept>
#include <string>

namespace bmx {

/// Bad user input or configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable, malformed or inconsistent data on disk (CLI exit code 2).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Persisted index has the wrong magic, version or layout.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace bmx
