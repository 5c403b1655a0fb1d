#pragma once

#include <stdexcept>
#include <string>

namespace tcell {

/// Invalid configuration, scenario definition, or command usage.
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure while integrating or analysing a model.
/// The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class IntegrationError : public NumericError {
public:
    using NumericError::NumericError;
};

class ModelError : public NumericError {
public:
    using NumericError::NumericError;
};

class SensitivityError : public NumericError {
public:
    using NumericError::NumericError;
};

class FitError : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace tcell
