#pragma once

#include <stdexcept>
#include <string>

namespace rcad {

// Base for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/parameter shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value or argument violates an operation's contract.
class InputError : public Error {
 public:
  using Error::Error;
};

// Tabular data does not match the expected columns/format.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Model/run configuration is inconsistent or invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Training aborted; message carries epoch/batch/loss diagnostics.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcad
