#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/structure.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

enum class SystemName {
  double_pendulum,
  fput,
  zero,  // H = 0 everywhere; degenerate stub for plumbing tests
};

inline std::string to_string(SystemName name) {
  switch (name) {
    case SystemName::double_pendulum: return "double_pendulum";
    case SystemName::fput: return "fput";
    case SystemName::zero: return "zero";
  }
  return "unknown";
}

inline SystemName parse_system_name(std::string_view s) {
  if (s == "double_pendulum" || s == "dp") return SystemName::double_pendulum;
  if (s == "fput") return SystemName::fput;
  if (s == "zero") return SystemName::zero;
  throw InvalidArgument("unknown system '" + std::string(s) + "'");
}

/// A benchmark Hamiltonian with closed-form energy and gradient.
/// States are ordered y = (q1, q2, p1, p2).
///
/// Double pendulum (nondimensional):
///   H = (p1^2/2 + p2^2 - p1 p2 cos(q1-q2)) / (1 + sin^2(q1-q2))
///       - 2 cos q1 - cos q2
///
/// FPUT chain with one stiff spring (m = 1):
///   H = (p1^2 + p2^2)/2 + omega^2/4 (q2-q1)^2 + q1^4 + q2^4
class HamiltonianSystem {
 public:
  static HamiltonianSystem double_pendulum() {
    return HamiltonianSystem(SystemName::double_pendulum, {});
  }
  static HamiltonianSystem fput(double omega = 2.0) {
    return HamiltonianSystem(SystemName::fput, {{"omega", omega}, {"m", 1.0}});
  }
  static HamiltonianSystem zero() { return HamiltonianSystem(SystemName::zero, {}); }
  static HamiltonianSystem from_name(SystemName name) {
    switch (name) {
      case SystemName::double_pendulum: return double_pendulum();
      case SystemName::fput: return fput();
      case SystemName::zero: return zero();
    }
    throw InvalidArgument("unknown system");
  }

  SystemName name() const noexcept { return name_; }
  Eigen::Index dim() const noexcept { return 4; }
  const std::map<std::string, double>& params() const noexcept { return params_; }
  StructureMatrix structure() const { return StructureMatrix(dim() / 2); }

  double energy(const State& y) const {
    check(y);
    switch (name_) {
      case SystemName::double_pendulum: {
        const double q1 = y[0], q2 = y[1], p1 = y[2], p2 = y[3];
        const double s = std::sin(q1 - q2), c = std::cos(q1 - q2);
        const double kinetic = 0.5 * p1 * p1 + p2 * p2 - p1 * p2 * c;
        return kinetic / (1.0 + s * s) - 2.0 * std::cos(q1) - std::cos(q2);
      }
      case SystemName::fput: {
        const double q1 = y[0], q2 = y[1], p1 = y[2], p2 = y[3];
        const double w2 = omega() * omega();
        const double dq = q2 - q1;
        return 0.5 * (p1 * p1 + p2 * p2) + 0.25 * w2 * dq * dq + std::pow(q1, 4) +
               std::pow(q2, 4);
      }
      case SystemName::zero: return 0.0;
    }
    return 0.0;
  }

  State gradient(const State& y) const {
    check(y);
    State g = State::Zero(4);
    switch (name_) {
      case SystemName::double_pendulum: {
        const double q1 = y[0], q2 = y[1], p1 = y[2], p2 = y[3];
        const double s = std::sin(q1 - q2), c = std::cos(q1 - q2);
        const double num = 0.5 * p1 * p1 + p2 * p2 - p1 * p2 * c;
        const double den = 1.0 + s * s;
        // d/d(q1-q2) of num/den by the quotient rule
        const double dt = (p1 * p2 * s * den - num * 2.0 * s * c) / (den * den);
        g[0] = dt + 2.0 * std::sin(q1);
        g[1] = -dt + std::sin(q2);
        g[2] = (p1 - p2 * c) / den;
        g[3] = (2.0 * p2 - p1 * c) / den;
        break;
      }
      case SystemName::fput: {
        const double q1 = y[0], q2 = y[1];
        const double w2 = omega() * omega();
        const double spring = 0.5 * w2 * (q2 - q1);
        g[0] = -spring + 4.0 * q1 * q1 * q1;
        g[1] = spring + 4.0 * q2 * q2 * q2;
        g[2] = y[2];
        g[3] = y[3];
        break;
      }
      case SystemName::zero: break;
    }
    return g;
  }

  /// f(y) = J grad H(y).
  State vector_field(const State& y) const { return structure().apply(gradient(y)); }

  VectorField field() const {
    return [sys = *this](const State& y) { return sys.vector_field(y); };
  }

 private:
  HamiltonianSystem(SystemName name, std::map<std::string, double> params)
      : name_(name), params_(std::move(params)) {}

  double omega() const { return params_.at("omega"); }

  void check(const State& y) const {
    if (y.size() != dim())
      throw InvalidArgument(to_string(name_) + ": expected state of dimension 4, got " +
                            std::to_string(y.size()));
  }

  SystemName name_;
  std::map<std::string, double> params_;
};

/// Initial values used for the benchmark experiments.
inline State benchmark_initial_value(SystemName name) {
  State y0(4);
  switch (name) {
    case SystemName::double_pendulum: y0 << -0.1, 0.5, -0.3, 0.1; break;
    case SystemName::fput: y0 << 0.2, 0.4, -0.3, 0.5; break;
    case SystemName::zero: y0 << 0.2, 0.4, -0.3, 0.5; break;
  }
  return y0;
}

}  // namespace mirkhnn
