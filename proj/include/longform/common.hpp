#pragma once

#include <stdexcept>
#include <string>

namespace longform {

// Invalid configuration values (bounds, divisibility, missing fields).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or truncated files, bad CSV rows, version mismatches.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor dimensions between caller data and model/config.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_config(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

inline void check_shape(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace longform
