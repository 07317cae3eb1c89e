#pragma once

#include <stdexcept>
#include <string>

namespace ecl {

/// Shape or layer-dimension mismatch (names the offending layer when known).
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument value (out-of-range label, layout mismatch, bad index).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed on-disk data (IDX files, checkpoints, CSV matrices).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration file failed schema validation.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation invoked in a state that cannot serve it (e.g. empty replay buffer).
class StateError : public std::runtime_error {
public:
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value produced where a finite one is required.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Broken internal invariant (stale caches, impossible branches).
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace ecl
