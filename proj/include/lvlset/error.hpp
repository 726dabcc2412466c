#pragma once

#include <stdexcept>
#include <string>

namespace lvlset {

/// Bad user input: malformed config, impossible sizes, invalid parameters.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical precondition violated at run time (CFL, boundary clash, caustic).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lvlset
