#pragma once

#include <stdexcept>
#include <string>

namespace sblq {

// Every failure raised by the library derives from Error. The subclass
// encodes the category the CLI maps onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument domain (bad lambda, bad fraction, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SymmetryError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or numerically broken inputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

// Well-formed content that violates a data invariant.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sblq
