#pragma once

#include <stdexcept>
#include <string>

namespace suplab {

/// Base of every error thrown by the library. `exit_code()` maps the error
/// category onto the CLI's exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration or parameters (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed, truncated or inconsistent input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Byte-level format error; the offending offset is kept for diagnostics.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// Non-finite values or failed numerical procedures (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Incompatible matrix or vector shapes.
class DimensionError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Nearest-neighbour retrieval on an empty or undersized dataset.
class RetrievalError : public DataError {
 public:
  using DataError::DataError;
};

/// Exhaustive search requested beyond its enumeration budget.
class BudgetError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace suplab
