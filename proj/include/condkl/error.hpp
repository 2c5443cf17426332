#pragma once

#include <stdexcept>
#include <string>

namespace condkl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A covariance matrix could not be factored even after the jitter ladder.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

/// A linear solve missed its residual target.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Conditioning left no stochastic dimension (r = 0).
class FullyDetermined : public Error {
 public:
  using Error::Error;
};

}  // namespace condkl
