// error.hpp: exception types shared by every qwitness module

#pragma once

#include <stdexcept>
#include <string>

namespace qwitness {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument: dimension mismatch, out-of-domain frequency, invalid spec.
class DomainError : public Error {
public:
    using Error::Error;
};

// Coherent amplitude too large for the truncated Fock space.
class TruncationError : public DomainError {
public:
    TruncationError(const std::string& what, double tail_weight)
        : DomainError(what), tail_weight_(tail_weight) {}
    double tail_weight() const noexcept { return tail_weight_; }

private:
    double tail_weight_;
};

// Base for numerical failures (CLI exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

class QuadratureError : public NumericalError {
public:
    QuadratureError(const std::string& what, double achieved_error)
        : NumericalError(what), achieved_error_(achieved_error) {}
    double achieved_error() const noexcept { return achieved_error_; }

private:
    double achieved_error_;
};

class TabulationError : public NumericalError {
public:
    TabulationError(const std::string& what, double max_deviation)
        : NumericalError(what), max_deviation_(max_deviation) {}
    double max_deviation() const noexcept { return max_deviation_; }

private:
    double max_deviation_;
};

class IntegrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Invalid or unparsable experiment configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string field = {})
        : Error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace qwitness
