#pragma once

#include <stdexcept>
#include <string>

namespace prefalign {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Raised when a training objective becomes NaN or infinite.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class AnnotatorError : public Error {
 public:
  using Error::Error;
};

}  // namespace prefalign
