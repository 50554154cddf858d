#pragma once

#include <stdexcept>
#include <string>

namespace palab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// sigma * sigma^T is singular (or below the ellipticity floor).
class EllipticityError : public Error {
public:
    using Error::Error;
};

/// A control tuple violates I - g_x sigma sigma^T > 0.
class AdmissibilityError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration; `key()` names the offending entry when known.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& message)
        : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
    explicit ConfigError(const std::string& message) : Error(message) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// The explicit time stepper could not honour its stability bound.
class StepSizeError : public Error {
public:
    using Error::Error;
};

}  // namespace palab
