#pragma once

#include <stdexcept>
#include <string>

namespace funloc {

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A requested problem size exceeds a configured cap.
class SizingError : public ConfigError {
public:
    explicit SizingError(const std::string& what) : ConfigError(what) {}
};

/// Target kind does not support the requested closed form.
class UnsupportedError : public ConfigError {
public:
    explicit UnsupportedError(const std::string& what) : ConfigError(what) {}
};

/// Non-finite data or a failed factorization (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// File system failure (CLI exit code 4).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace funloc
