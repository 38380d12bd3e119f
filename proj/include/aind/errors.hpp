#pragma once

#include <stdexcept>
#include <string>

namespace aind {

// Base error. category() is the machine-parseable tag printed by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

// Invalid configuration, arguments or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

// Tensor shapes that do not fit together.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* category() const noexcept override { return "shape"; }
};

// An operation invoked in the wrong state (backward twice, step before backward, ...).
class StateError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "state"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "io"; }
};

}  // namespace aind
