#pragma once

#include <stdexcept>
#include <string>

namespace beamlab {

// Config and validation problems map to CLI exit code 2, I/O problems to 4,
// everything else (std::runtime_error and friends) to 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace beamlab
