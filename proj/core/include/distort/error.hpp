#pragma once

#include <stdexcept>
#include <string>

namespace distort {

// Process exit codes used by the command-line front end.
enum class ExitCode : int { Ok = 0, Config = 2, Numeric = 3, Consistency = 4 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

// Invalid arguments: bad parameters, probabilities outside [0,1], bad indices.
class DomainError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::Config; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::Config; }
};

// Grids too coarse or narrow, singular drift, non-finite Monte Carlo exponents.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::Numeric; }
};

// mon2 violations in strict mode, broken monotonicity after induction.
class ConsistencyError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::Consistency; }
};

}  // namespace distort
