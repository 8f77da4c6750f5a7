#pragma once

#include <stdexcept>
#include <string>

namespace gas {

/// Invalid or unknown configuration (bad key, out-of-range hyperparameter,
/// unknown environment name). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (index out of range, shape
/// mismatch, empty batch).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed or incompatible file content.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-format version differs from what this build reads.
class VersionError : public SchemaError {
public:
    VersionError(const std::string& what, unsigned found, unsigned expected)
        : SchemaError(what + ": version " + std::to_string(found) + ", expected " +
                      std::to_string(expected)),
          found_(found), expected_(expected) {}

    unsigned found() const noexcept { return found_; }
    unsigned expected() const noexcept { return expected_; }

private:
    unsigned found_;
    unsigned expected_;
};

/// Training or evaluation failed at run time (non-finite loss, I/O failure).
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ContractViolation(message);
}

}  // namespace gas
