#pragma once

#include <stdexcept>
#include <string>

namespace dmg {

/// Invalid problem/solver configuration (bad grid size, malformed spec, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operand shapes do not match.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical breakdown: singular pivot, non-convergence, non-finite values.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg, double magnitude = 0.0)
        : std::runtime_error(msg), magnitude_(magnitude) {}

    /// Offending quantity (pivot magnitude, residual, ...), when meaningful.
    double magnitude() const { return magnitude_; }

private:
    double magnitude_;
};

}  // namespace dmg
