#pragma once

#include <stdexcept>
#include <string>

namespace megdict {

// Exit codes used by the command-line tools.
enum ExitCode : int {
  exit_ok = 0,
  exit_config_error = 2,
  exit_numerical_error = 3,
  exit_partial_failure = 4,
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

// Invalid configuration, bad user input, dimension mismatches.
struct ConfigError : Error {
  using Error::Error;
  int exit_code() const override { return exit_config_error; }
};

// Factorization failures, non-finite values, singular systems.
struct NumericalError : Error {
  using Error::Error;
  int exit_code() const override { return exit_numerical_error; }
};

// Too many failed trials in a protocol run.
struct PartialFailureAbort : Error {
  using Error::Error;
  int exit_code() const override { return exit_partial_failure; }
};

// A simulated source produced no measurable field; the trial is redrawn.
struct SilentSourceError : Error {
  using Error::Error;
};

}  // namespace megdict
