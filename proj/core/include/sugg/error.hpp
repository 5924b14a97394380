#pragma once

#include <stdexcept>
#include <string>

namespace sugg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates an operation's documented preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Parse failure with a 1-based line number attached.
class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : IoError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sugg
