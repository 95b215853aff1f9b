#pragma once

#include <stdexcept>
#include <string>

namespace hrf {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV arity, unparsable numbers or dates).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row = -1)
      : Error(row >= 0 ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

/// Input that parses but violates a declared schema or invariant.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A train/test split that leaves one side empty.
class DegenerateSplitError : public Error {
 public:
  using Error::Error;
};

/// Query rows that do not conform to a trained model's feature schema.
class PredictionError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hrf
