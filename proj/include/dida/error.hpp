#pragma once

#include <stdexcept>
#include <string>

namespace dida {

// Root of every error raised by the library. The CLI maps subclasses to
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Dataset-level failures: empty after filtering, no common users, a
// catalogue too small for the evaluation protocol.
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad configuration value, unknown key, incompatible variant combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A required on-disk artifact (prepared dataset, model) is missing.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace dida
