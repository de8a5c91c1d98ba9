#pragma once

#include <stdexcept>
#include <string>

namespace gml {

// Thrown on mismatched shapes or out-of-range arguments.
struct InvalidInputError : std::invalid_argument {
    explicit InvalidInputError(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a computation produces non-finite values.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on malformed or truncated on-disk artifacts.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a file declares an unsupported format version.
struct VersionError : FormatError {
    explicit VersionError(const std::string& what) : FormatError(what) {}
};

// Thrown on invalid experiment configuration or missing artifacts.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gml
