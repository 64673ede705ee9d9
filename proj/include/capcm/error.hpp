#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace capcm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments to an operation (out-of-range parameters, mismatched domains).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A problem hypothesis (positivity, capillarity, symmetry, integral condition) does not hold.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// The linearization left the admissible cone at some nodes.
class EllipticityError : public Error {
 public:
  EllipticityError(const std::string& what, std::vector<std::size_t> nodes)
      : Error(what), nodes_(std::move(nodes)) {}
  const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<std::size_t> nodes_;
};

/// Newton iteration did not reach its tolerance (iteration cap or line-search stall).
class NewtonError : public Error {
 public:
  NewtonError(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}
  /// Residual max-norm after each iteration.
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Continuation step size fell below its floor.
class ContinuationStall : public Error {
 public:
  using Error::Error;
};

/// An accepted continuation step has min lambda_min below the configured floor.
class ConvexityError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace capcm
