#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/hamiltonians.hpp"
#include "mirkhnn/reference_solver.hpp"
#include "mirkhnn/steppers.hpp"

namespace mirkhnn {

/// One step of some method. `y_np1_exact` is the exact flow value at t + h;
/// injected methods consume it, forward methods ignore it.
using OneStepMap =
    std::function<State(const State& y_n, const State& y_np1_exact, double h)>;

enum class ErrorTarget { vs_exact_flow, vs_forward_step };

struct OrderFit {
  double slope = 0.0;
  std::vector<double> h;
  std::vector<double> errors;
};

inline constexpr double kOrderNoiseFloor = 1e-12;

/// Least-squares slope of log(error) against log(h).
inline double fit_log_slope(const std::vector<double>& h, const std::vector<double>& e) {
  const double n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Local one-step error of `step` from y0 for each h, measured either against
/// the exact flow or against `reference` (e.g. the forward-solved step).
inline OrderFit fit_order(const OneStepMap& step, const HamiltonianSystem& system,
                          const State& y0, const std::vector<double>& h_list,
                          ErrorTarget target, const OneStepMap& reference = {},
                          const SolverOptions& flow_options = {}) {
  if (h_list.size() < 4) throw InvalidArgument("estimate_order: need at least 4 step sizes");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    if (!(h_list[i] > 0.0)) throw InvalidArgument("estimate_order: step sizes must be positive");
    if (i > 0 && !(h_list[i] < h_list[i - 1]))
      throw InvalidArgument("estimate_order: step sizes must be decreasing");
  }
  if (target == ErrorTarget::vs_forward_step && !reference)
    throw InvalidArgument("estimate_order: vs_forward_step needs a reference step");

  OrderFit fit;
  for (double h : h_list) {
    const State exact = reference_solve(system, y0, h, h, flow_options).states.back();
    const State approx = step(y0, exact, h);
    const State baseline =
        target == ErrorTarget::vs_exact_flow ? exact : reference(y0, exact, h);
    const double err = (approx - baseline).norm();
    if (!(err >= kOrderNoiseFloor))
      throw UnreliableFit("estimate_order: error " + std::to_string(err) + " at h = " +
                          std::to_string(h) + " is below the noise floor");
    fit.h.push_back(h);
    fit.errors.push_back(err);
  }
  fit.slope = fit_log_slope(fit.h, fit.errors);
  return fit;
}

inline double estimate_order(const OneStepMap& step, const HamiltonianSystem& system,
                             const State& y0, const std::vector<double>& h_list,
                             ErrorTarget target, const OneStepMap& reference = {},
                             const SolverOptions& flow_options = {}) {
  return fit_order(step, system, y0, h_list, target, reference, flow_options).slope;
}

/// Global error after integrating to `horizon` with steps h, for each h.
inline OrderFit fit_global_order(const OneStepMap& step, const HamiltonianSystem& system,
                                 const State& y0, const std::vector<double>& h_list,
                                 double horizon, const SolverOptions& opt = {}) {
  if (h_list.size() < 4) throw InvalidArgument("estimate_order: need at least 4 step sizes");
  OrderFit fit;
  for (double h : h_list) {
    const auto truth = reference_solve(system, y0, horizon, h, opt);
    State y = y0;
    for (long n = 0; n < truth.transitions(); ++n) y = step(y, truth.states[n + 1], h);
    const double err = (y - truth.states.back()).norm();
    if (!(err >= kOrderNoiseFloor))
      throw UnreliableFit("estimate_order: error " + std::to_string(err) + " at h = " +
                          std::to_string(h) + " is below the noise floor");
    fit.h.push_back(h);
    fit.errors.push_back(err);
  }
  fit.slope = fit_log_slope(fit.h, fit.errors);
  return fit;
}

/// Adapters turning the steppers into OneStepMaps over a system's true field.
inline OneStepMap forward_map(const MirkTableau& tab, const HamiltonianSystem& system,
                              double tol = 1e-14) {
  return [tab, system, tol](const State& y, const State&, double h) {
    return mirk_forward_step(tab, [&](const State& x) { return system.vector_field(x); }, y, h,
                             tol);
  };
}

inline OneStepMap injected_map(const MirkTableau& tab, const HamiltonianSystem& system) {
  return [tab, system](const State& y, const State& y_exact, double h) {
    return mirk_injected_step(tab, [&](const State& x) { return system.vector_field(x); }, y,
                              y_exact, h);
  };
}

inline OneStepMap explicit_map(const ExplicitTableau& tab, const HamiltonianSystem& system) {
  return [tab, system](const State& y, const State&, double h) {
    return explicit_step(tab, [&](const State& x) { return system.vector_field(x); }, y, h);
  };
}

}  // namespace mirkhnn
