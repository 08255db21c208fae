#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fuma {

/// Base for every data or parameter error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (event log, catalog, feature matrix, model).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

/// A precondition on arguments was violated (bad k, too few rows, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Rule mining produced no rule above the support floor.
class EmptyRuleSetError : public Error {
 public:
  using Error::Error;
};

}  // namespace fuma
