#pragma once

#include <stdexcept>
#include <string>

namespace rfod {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input data (CSV, JSON, model files).
class InputError : public Error {
public:
    using Error::Error;
};

/// Invalid hyperparameters or option combinations.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Test data does not match the schema a model was trained on.
class SchemaMismatch : public Error {
public:
    using Error::Error;
};

/// Labels unusable for evaluation (e.g. only one class present).
class LabelError : public Error {
public:
    using Error::Error;
};

}  // namespace rfod
