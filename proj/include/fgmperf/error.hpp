#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fgmperf {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (budget, capacity, loss parameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that violates a dataset invariant (degenerate labels, bad values).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError(what + " at line " + std::to_string(line)), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace fgmperf
