#pragma once

#include <stdexcept>
#include <string>

namespace rfnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The conductance graph does not connect every vertex; resistances would be infinite.
class DisconnectedNetwork : public Error {
 public:
  using Error::Error;
};

/// A resistance matrix that no finite network reproduces.
class NotRealizable : public Error {
 public:
  using Error::Error;
};

/// A randomized generator ran out of attempts. Retrying with another seed may succeed.
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace rfnet
