#pragma once

#include <stdexcept>
#include <string>

namespace fsteer {

// Root of every error raised by the library. Each subclass maps to one
// failure category so callers (HTTP layer, CLI) can choose a status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes or layouts that do not line up.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Operation invoked in a state where it is not permitted.
class StateError : public Error {
public:
    using Error::Error;
};

// Degenerate numeric input (zero norm, non-finite values).
class NumericError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class UnsupportedVersionError : public LoadError {
public:
    using LoadError::LoadError;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Calibration reference image rejected by the detector at zero strength.
class InvalidReferenceError : public Error {
public:
    using Error::Error;
};

// Failure inside a sampler or plugin, annotated with where it happened.
class SampleError : public Error {
public:
    SampleError(std::size_t index, const std::string& what)
        : Error("sample " + std::to_string(index) + ": " + what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

} // namespace fsteer
