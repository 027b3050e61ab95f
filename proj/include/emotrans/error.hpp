#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace emotrans {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A value or object violates a documented invariant (bad manifest field,
// overlapping segments, mismatched lengths, missing catalog entry, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An argument is outside its documented domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Unsupported audio/file layout (sample rate, frame length, bad WAV, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// An external-model client failed, or kept violating its contract after the
// configured number of retries. Carries one transcript per attempt.
class ClientError : public Error {
 public:
  ClientError(const std::string& msg, std::vector<std::string> attempts = {})
      : Error(msg), attempts_(std::move(attempts)) {}

  const std::vector<std::string>& attempts() const { return attempts_; }

 private:
  std::vector<std::string> attempts_;
};

// SER consistency gate exhausted its retry budget.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training diverged or could not proceed.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A caption or markup string could not be interpreted.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Bad or incomplete pipeline configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace emotrans
