#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spoofsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid node placement (non-positive distance, coincident nodes).
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Bad layer dimensions, activations or other model configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Mismatched matrix or vector widths.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf or out-of-range probabilities.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Error-rate request on a test set that lacks one of the two classes.
class DegenerateMetricsError : public Error {
public:
    using Error::Error;
};

/// Scenario document that parsed but failed validation. Carries every
/// violation, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations);

    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Malformed scenario document (syntax, wrong type, unknown key).
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace spoofsim
