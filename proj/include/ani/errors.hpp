#pragma once

#include <stdexcept>
#include <string>

namespace ani {

// Malformed or inconsistent caller input. CLI exit status 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A unit whose propensity for a contrasted exposure lies outside (0, 1).
class OverlapError : public InputError {
 public:
  OverlapError(const std::string& what, std::size_t unit) : InputError(what), unit_(unit) {}
  std::size_t unit() const noexcept { return unit_; }

 private:
  std::size_t unit_;
};

class UnsupportedExposureError : public InputError {
 public:
  using InputError::InputError;
};

// Problem too large for an exhaustive routine. CLI exit status 2.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iteration failed to converge. CLI exit status 2.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace ani
