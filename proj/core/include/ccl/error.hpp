#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (vector length, matrix rows/cols).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in inputs or intermediate results.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A constraint matrix lost row rank while simulating or retargeting.
class RankCollapse : public Error {
 public:
  RankCollapse(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Malformed input file (keypoints, CSV, JSON).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Optimizer could not produce a usable incumbent.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_value)
      : Error(what), best_value_(best_value) {}
  double best_value() const noexcept { return best_value_; }

 private:
  double best_value_;
};

}  // namespace ccl
