#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/hamiltonians.hpp"
#include "mirkhnn/io.hpp"
#include "mirkhnn/model.hpp"
#include "mirkhnn/reference_solver.hpp"
#include "mirkhnn/trajectory.hpp"

namespace mirkhnn {

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
};

inline constexpr TimeWindow kInterpolationWindow{0.0, 20.0};
inline constexpr TimeWindow kExtrapolationWindow{20.0, 80.0};

struct EvalReport {
  double e_interp = 0.0;
  double e_extrap = 0.0;
  double e_hamiltonian = 0.0;
  double h_test = 0.0;
  long n_test = 0;
  TimeWindow interp = kInterpolationWindow;
  TimeWindow extrap = kExtrapolationWindow;
};

inline Json to_json(const EvalReport& r) {
  return Json{{"e_interp", r.e_interp},
              {"e_extrap", r.e_extrap},
              {"e_hamiltonian", r.e_hamiltonian},
              {"h_test", r.h_test},
              {"n_test", r.n_test},
              {"windows",
               {{"interp", {r.interp.begin, r.interp.end}},
                {"extrap", {r.extrap.begin, r.extrap.end}}}}};
}

/// Test grid for data sampled at step h with N transitions: h / 20 spacing
/// and `horizon_ratio` times the training span.
inline double test_step(double h) { return h / 20.0; }
inline long test_steps(long n_samples, double horizon_ratio = 4.0) {
  return std::lround(horizon_ratio * 20.0 * double(n_samples));
}

inline constexpr double kDivergenceBound = 1e6;

/// Integrate the learned field J grad H_theta with the adaptive solver,
/// sampled every h_test.
inline Trajectory rollout(const MlpHamiltonian& model, const State& y0, double h_test,
                          long n_steps, SolverOptions opt = {}) {
  if (!(h_test > 0.0)) throw InvalidArgument("rollout: h_test must be positive");
  if (n_steps < 1) throw InvalidArgument("rollout: need at least one step");
  opt.divergence_bound = kDivergenceBound;
  auto f = [&model](const State& y) { return model.vector_field(y); };
  try {
    return sample_flow(f, y0, h_test * double(n_steps), h_test, opt, "learned");
  } catch (const StepUnderflow& e) {
    throw Divergence(std::string("rollout: ") + e.what(),
                     static_cast<long>(e.time() / h_test));
  }
}

inline bool in_window(double t, const TimeWindow& w, double h) {
  const double eps = 1e-9 * h;
  return t >= w.begin - eps && t <= w.end + eps;
}

/// Mean 2-norm deviation over the grid points inside the closed window.
inline double flow_error(const Trajectory& rollout, const Trajectory& truth, const TimeWindow& w) {
  if (rollout.states.size() != truth.states.size() || rollout.dim() != truth.dim() ||
      std::abs(rollout.h - truth.h) > 1e-12 * truth.h ||
      std::abs(rollout.t0 - truth.t0) > 1e-12 * truth.h)
    throw InvalidArgument("flow_error: trajectories are on different grids");
  double sum = 0.0;
  long count = 0;
  for (long n = 0; n <= truth.transitions(); ++n) {
    if (!in_window(truth.time(n), w, truth.h)) continue;
    sum += (rollout.states[n] - truth.states[n]).norm();
    ++count;
  }
  if (count == 0) throw InvalidArgument("flow_error: window contains no grid points");
  return sum / double(count);
}

/// Mean absolute deviation of H - H_theta around its mean along `truth`.
/// Insensitive to the additive constant H_theta is only determined up to.
template <class LearnedEnergy>
  requires std::is_invocable_r_v<double, LearnedEnergy&, const State&>
double hamiltonian_error(LearnedEnergy&& learned, const HamiltonianSystem& system,
                         const Trajectory& truth) {
  truth.validate();
  std::vector<double> diff;
  diff.reserve(truth.states.size());
  for (const auto& y : truth.states) diff.push_back(system.energy(y) - learned(y));
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= double(diff.size());
  double mad = 0.0;
  for (double d : diff) mad += std::abs(d - mean);
  return mad / double(diff.size());
}

inline double hamiltonian_error(const MlpHamiltonian& model, const HamiltonianSystem& system,
                                const Trajectory& truth) {
  return hamiltonian_error([&model](const State& y) { return model.eval(y); }, system, truth);
}

/// Ground truth on the test grid.
inline Trajectory test_truth(const HamiltonianSystem& system, const State& y0, double h,
                             long n_samples, double horizon_ratio = 4.0,
                             const SolverOptions& opt = {}) {
  const double h_test = test_step(h);
  const long n_test = test_steps(n_samples, horizon_ratio);
  return reference_solve(system, y0, h_test * double(n_test), h_test, opt);
}

/// Rollout-based metrics of a learned model against `truth` (from test_truth).
template <class LearnedField, class LearnedEnergy>
EvalReport evaluate_field(LearnedField&& field, LearnedEnergy&& energy,
                          const HamiltonianSystem& system, const Trajectory& truth,
                          const SolverOptions& opt = {}) {
  EvalReport r;
  r.h_test = truth.h;
  r.n_test = truth.transitions();
  SolverOptions o = opt;
  o.divergence_bound = kDivergenceBound;
  Trajectory ro;
  try {
    ro = sample_flow(field, truth.states.front(), truth.h * double(truth.transitions()), truth.h,
                     o, "learned");
  } catch (const StepUnderflow& e) {
    throw Divergence(std::string("rollout: ") + e.what(), static_cast<long>(e.time() / truth.h));
  }
  r.extrap.end = truth.time(truth.transitions());
  r.e_interp = flow_error(ro, truth, r.interp);
  r.e_extrap = flow_error(ro, truth, r.extrap);
  r.e_hamiltonian = hamiltonian_error(energy, system, truth);
  return r;
}

inline EvalReport evaluate(const MlpHamiltonian& model, const HamiltonianSystem& system,
                           const Trajectory& truth, const SolverOptions& opt = {}) {
  return evaluate_field([&model](const State& y) { return model.vector_field(y); },
                        [&model](const State& y) { return model.eval(y); }, system, truth, opt);
}

}  // namespace mirkhnn
