#pragma once
#include <stdexcept>
#include <string>

namespace seqrej {

// Error taxonomy. ConfigError maps to CLI exit code 2, everything else to 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Enumeration support would exceed the configured budget.
class EnumerationTooLarge : public Error {
public:
    explicit EnumerationTooLarge(const std::string& msg) : Error(msg) {}
};

// Exact-consistency version space came out empty; misspecified fitting applies.
class RealizabilityError : public Error {
public:
    explicit RealizabilityError(const std::string& msg) : Error(msg) {}
};

// Every candidate has infinite log-loss; no MLE exists.
class NoSupportError : public Error {
public:
    explicit NoSupportError(const std::string& msg) : Error(msg) {}
};

class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& msg) : Error(msg) {}
};

} // namespace seqrej
