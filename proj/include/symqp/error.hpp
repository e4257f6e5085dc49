#pragma once

#include <stdexcept>
#include <string>

namespace symqp {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, overflow, or division by zero inside a decision diagram.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operands of incompatible shape (bit lists, block layouts, dense sizes).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments that do not fit one of the more specific categories.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A zero where an inverse was requested.
class SingularError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Problem shapes the matrix-free solver cannot handle (e.g. non-separable Q
/// together with equality rows).
class UnsupportedStructure : public Error {
 public:
  using Error::Error;
};

/// Parse errors carry a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& msg)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace symqp
