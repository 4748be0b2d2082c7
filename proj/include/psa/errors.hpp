#pragma once

#include <stdexcept>
#include <string>

namespace psa {

// Raised for malformed space/adapter/matrix documents and invalid settings.
// The CLI maps these to exit code 2 before any solver process is spawned.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a model computation cannot proceed (e.g. a Gram matrix that
// stays indefinite after the maximum jitter).
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace psa
