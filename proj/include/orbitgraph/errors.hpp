#pragma once

#include <stdexcept>
#include <string>

namespace orbitgraph {

// Operand shapes do not conform.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A documented precondition of an operation was violated.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Input outside the mathematical domain (non-positive radius, etc).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Invalid configuration; `field()` names the offending entry.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Malformed dataset / checkpoint file.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File written by an incompatible schema version.
class VersionError : public ParseError {
public:
    using ParseError::ParseError;
};

// Training diverged (NaN/Inf loss).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace orbitgraph
