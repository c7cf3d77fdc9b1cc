#pragma once

#include <stdexcept>
#include <string>

namespace mirkhnn {

/// Broad classes of failure; the CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_argument,  // bad shapes, bad config, missing inputs
  numerical,         // overflow, non-convergence, divergence, step underflow
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::invalid_argument, what) {}
};

/// A non-finite value appeared. `index` names the stage or transition.
class NumericalOverflow : public Error {
 public:
  NumericalOverflow(const std::string& what, long index)
      : Error(ErrorKind::numerical, what), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double residual)
      : Error(ErrorKind::numerical, what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Adaptive step size fell below the floor.
class StepUnderflow : public Error {
 public:
  StepUnderflow(const std::string& what, double t)
      : Error(ErrorKind::numerical, what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

/// Rollout left the bounded region; `step` is the last sample index reached.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, long step)
      : Error(ErrorKind::numerical, what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Errors in an order fit sit below the floating point noise floor.
class UnreliableFit : public Error {
 public:
  explicit UnreliableFit(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

}  // namespace mirkhnn
