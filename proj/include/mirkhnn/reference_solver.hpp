#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mirkhnn/detail/dop853_coefficients.hpp"
#include "mirkhnn/errors.hpp"
#include "mirkhnn/hamiltonians.hpp"
#include "mirkhnn/trajectory.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

struct SolverOptions {
  double rtol = 1e-12;
  double atol = 1e-12;
  double min_step = 1e-14;
  /// Rollouts whose max-norm exceeds this bound raise Divergence.
  double divergence_bound = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Adaptive DOP853 integrator. Step endpoints are clamped onto sample times,
/// so no dense output is involved.
template <class Field>
class Dop853 {
 public:
  Dop853(Field& f, const SolverOptions& opt) : f_(f), opt_(opt) {}

  /// Advance y (with derivative fy = f(y)) from t to t_target. `sample` is
  /// the index of the last sample reached, for error reporting.
  void advance(State& y, State& fy, double t, double t_target, long sample) {
    namespace c = dop853;
    if (h_proposal_ <= 0.0) h_proposal_ = initial_step(y, fy, t_target - t);
    const double n = static_cast<double>(y.size());
    while (t < t_target) {
      const double remaining = t_target - t;
      double h = std::min(h_proposal_, remaining);
      bool clamped = h == remaining;
      bool rejected = false;
      while (true) {
        if (h < opt_.min_step)
          throw StepUnderflow("reference solver: step size underflow at t = " +
                                  std::to_string(t),
                              t);
        k_[0] = fy;
        for (int s = 1; s < c::kStages; ++s) {
          State x = y;
          for (int j = 0; j < s; ++j)
            if (c::kA[s][j] != 0.0) x += (h * c::kA[s][j]) * k_[j];
          k_[s] = f_(x);
        }
        State y_new = y;
        for (int s = 0; s < c::kStages; ++s)
          if (c::kB[s] != 0.0) y_new += (h * c::kB[s]) * k_[s];
        k_[c::kStages] = f_(y_new);

        double err = std::numeric_limits<double>::infinity();
        if (y_new.allFinite() && k_[c::kStages].allFinite()) {
          const State scale =
              (opt_.atol + y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array() * opt_.rtol).matrix();
          State e5 = State::Zero(y.size()), e3 = State::Zero(y.size());
          for (int s = 0; s <= c::kStages; ++s) {
            e5 += c::kE5[s] * k_[s];
            e3 += c::kE3[s] * k_[s];
          }
          const double n5 = e5.cwiseQuotient(scale).squaredNorm();
          const double n3 = e3.cwiseQuotient(scale).squaredNorm();
          err = (n5 == 0.0 && n3 == 0.0) ? 0.0 : h * n5 / std::sqrt((n5 + 0.01 * n3) * n);
        }

        if (err < 1.0) {
          double factor = err == 0.0 ? kMaxFactor
                                     : std::min(kMaxFactor, kSafety * std::pow(err, -1.0 / 8.0));
          if (rejected) factor = std::min(1.0, factor);
          // A step shortened only to hit a sample time keeps the old proposal.
          if (!(clamped && !rejected && h * factor < h_proposal_)) h_proposal_ = h * factor;
          if (clamped) t = t_target;
          else t += h;
          y = std::move(y_new);
          fy = k_[c::kStages];
          if (!(y.lpNorm<Eigen::Infinity>() <= opt_.divergence_bound))
            throw Divergence("rollout diverged after sample " + std::to_string(sample), sample);
          ++steps_;
          break;
        }
        h *= std::max(kMinFactor, kSafety * std::pow(err, -1.0 / 8.0));
        clamped = false;
        rejected = true;
        ++rejections_;
      }
    }
  }

  long steps() const noexcept { return steps_; }
  long rejections() const noexcept { return rejections_; }

 private:
  static constexpr double kSafety = 0.9;
  static constexpr double kMinFactor = 0.2;
  static constexpr double kMaxFactor = 10.0;

  double initial_step(const State& y, const State& fy, double span) {
    const State scale = (opt_.atol + y.cwiseAbs().array() * opt_.rtol).matrix();
    const double d0 = y.cwiseQuotient(scale).norm() / std::sqrt(double(y.size()));
    const double d1 = fy.cwiseQuotient(scale).norm() / std::sqrt(double(y.size()));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    const State f1 = f_(State(y + h0 * fy));
    const double d2 = (f1 - fy).cwiseQuotient(scale).norm() / std::sqrt(double(y.size())) / h0;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15)
                          ? std::max(1e-6, h0 * 1e-3)
                          : std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
    return std::min({100 * h0, h1, span});
  }

  Field& f_;
  SolverOptions opt_;
  std::array<State, dop853::kStages + 1> k_;
  double h_proposal_ = 0.0;
  long steps_ = 0;
  long rejections_ = 0;
};

}  // namespace detail

/// Integrate y' = f(y) from y0 and sample at t_n = n * sample_h for
/// n = 0..N with N * sample_h = t_end.
template <class Field>
Trajectory sample_flow(Field&& f, const State& y0, double t_end, double sample_h,
                       const SolverOptions& opt = {}, std::string system_name = "") {
  if (!(sample_h > 0.0)) throw InvalidArgument("reference solver: sample_h must be positive");
  if (!(t_end > 0.0)) throw InvalidArgument("reference solver: t_end must be positive");
  const double ratio = t_end / sample_h;
  const long n_steps = std::lround(ratio);
  if (n_steps < 1 || std::abs(ratio - static_cast<double>(n_steps)) > 1e-9 * ratio)
    throw InvalidArgument("reference solver: t_end must be a positive multiple of sample_h");

  Trajectory traj{0.0, sample_h, {}, std::move(system_name)};
  traj.states.reserve(n_steps + 1);
  traj.states.push_back(y0);
  State y = y0;
  State fy = f(y);
  detail::Dop853<std::remove_reference_t<Field>> solver(f, opt);
  for (long n = 1; n <= n_steps; ++n) {
    solver.advance(y, fy, static_cast<double>(n - 1) * sample_h,
                   static_cast<double>(n) * sample_h, n - 1);
    traj.states.push_back(y);
  }
  return traj;
}

/// Ground-truth trajectory of a benchmark system.
inline Trajectory reference_solve(const HamiltonianSystem& system, const State& y0,
                                  double t_end, double sample_h, const SolverOptions& opt = {}) {
  if (y0.size() != system.dim())
    throw InvalidArgument("reference_solve: initial value has wrong dimension");
  auto f = [&system](const State& y) { return system.vector_field(y); };
  return sample_flow(f, y0, t_end, sample_h, opt, to_string(system.name()));
}

}  // namespace mirkhnn
