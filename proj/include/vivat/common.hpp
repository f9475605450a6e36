#pragma once

#include <stdexcept>
#include <string>

namespace vivat {

// Error taxonomy. The CLI maps these onto exit codes:
// validation/config -> 2, divergence -> 3, io/integrity/version -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct ShapeError : ValidationError {
    using ValidationError::ValidationError;
};

struct ConfigError : ValidationError {
    using ValidationError::ValidationError;
};

struct DivergenceError : Error {
    std::string component;
    explicit DivergenceError(const std::string& comp)
        : Error("non-finite loss component: " + comp), component(comp) {}
};

struct IoError : Error {
    using Error::Error;
};

struct IntegrityError : IoError {
    using IoError::IoError;
};

struct VersionError : IoError {
    using IoError::IoError;
};

}  // namespace vivat
