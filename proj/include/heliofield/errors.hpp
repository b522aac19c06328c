#pragma once

#include <stdexcept>
#include <string>

namespace heliofield {

/// Base class for all library errors. Carries the process exit code the
/// CLI maps the error to (0 = success is never an error).
class Error : public std::runtime_error {
 public:
  explicit Error(std::string msg, int exit_code = 1)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}

  [[nodiscard]] int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Malformed or inconsistent configuration (unknown key, bad value,
/// violated config invariant). CLI exit code 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};

/// A required input file or key is absent. CLI exit code 3.
class MissingInputError : public Error {
 public:
  explicit MissingInputError(std::string msg) : Error(std::move(msg), 3) {}
};

/// Numeric divergence: non-finite loss or gradient, failed optimization
/// step. CLI exit code 4.
class NumericError : public Error {
 public:
  explicit NumericError(std::string msg) : Error(std::move(msg), 4) {}
};

/// Invalid data passed to an operation (empty stream, degenerate sample,
/// out-of-range coordinate, shape mismatch).
class DataError : public Error {
 public:
  explicit DataError(std::string msg) : Error(std::move(msg), 1) {}
};

}  // namespace heliofield
