#pragma once

#include <stdexcept>
#include <string>

namespace habsim {

/// Invalid configuration or parameter set (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A dual control violated the positivity its upper bound requires
/// (CLI exit code 3). Clamping would silently void the bound, so this is fatal.
struct InfeasibleDualError : std::runtime_error {
    InfeasibleDualError(const std::string& what, double fraction)
        : std::runtime_error(what), offending_fraction(fraction) {}
    double offending_fraction = 0.0;
};

/// Budget root-finding failed to bracket or converge (CLI exit code 4).
struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace habsim
