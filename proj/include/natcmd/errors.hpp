#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace natcmd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Values that violate a domain invariant (non-finite coordinates, unknown labels, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or training precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Model file could not be read back into a valid model.
class ModelLoadError : public Error {
 public:
  using Error::Error;
};

/// A metric that is undefined for its input (e.g. accuracy of an empty matrix).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace natcmd
