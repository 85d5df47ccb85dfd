#pragma once

#include <stdexcept>
#include <string>

namespace voxflow {

// Every library failure derives from Error; the CLI maps the family to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied parameters or configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation parameter outside its domain, e.g. an even patch size.
class ParameterError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Tensor shapes that do not conform.
class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Input data is malformed or inconsistent (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

// A metric is undefined for the given labels (single class, empty mask).
class UndefinedMetricError : public DataError {
 public:
  using DataError::DataError;
};

// Score field cannot be normalized because it is constant.
class DegenerateVolumeError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite values during evaluation or training (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Raised by the contract checks of the differentiation tape.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace voxflow
