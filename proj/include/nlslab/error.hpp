#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlslab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Equation parameters violate a structural requirement, or an operation
/// needs an admissible (intercritical) spec and did not get one.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed; carries the residual/step history.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Non-finite or runaway values in a time evolution.
class NaNGuardError : public Error {
 public:
  NaNGuardError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace nlslab
