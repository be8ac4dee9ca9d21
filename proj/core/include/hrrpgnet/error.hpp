#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hrrpgnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN, infinity, or another non-finite quantity reached a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is invalid or inconsistent with another.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An API was called out of order or with arguments it cannot accept.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow its documented format as a whole.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A single line of a text file could not be parsed.
class ParseError : public FormatError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hrrpgnet
