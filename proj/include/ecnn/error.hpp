#pragma once

#include <stdexcept>
#include <string>

namespace ecnn {

// Every failure surfaced by the library derives from Error so callers can
// map categories onto exit codes without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or geometries that do not fit together.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf produced or consumed, or a scalar argument outside its domain.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Bad configuration values (model config, CLI config files).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable, malformed, or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// A file header that does not parse.
class HeaderError : public DataError {
public:
    using DataError::DataError;
};

/// A payload shorter than its header promises.
class TruncatedError : public DataError {
public:
    using DataError::DataError;
};

/// Declared dimensions that are zero or whose element count overflows.
class DimensionError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace ecnn
