#pragma once

#include <stdexcept>
#include <string>

namespace bdlab {

// Configuration / schema problems (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: non-finite states, CFL violations, solver breakdown
// (CLI exit code 3).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bdlab
