#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pathflow {

/// Point outside the chart domain of a flow.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller violated a precondition (empty sample set, off-grid slot, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed: SPD loss, solver non-convergence, rank deficiency.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A simulated path left the chart through a non-boundary edge.
class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Geodesic solve failed while driving a coupled pair.
class CouplingError : public NumericError {
 public:
  CouplingError(const std::string& what, std::size_t step, double residual)
      : NumericError(what, residual), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Invalid scenario or flow definition. Line 0 means "not tied to a line".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace pathflow
