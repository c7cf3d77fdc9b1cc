#pragma once

#include <string>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/tableaus.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

namespace detail {

inline void require_finite(const State& x, const char* where, long index) {
  if (!x.allFinite())
    throw NumericalOverflow(std::string(where) + ": non-finite value at stage " +
                                std::to_string(index),
                            index);
}

}  // namespace detail

/// MIRK step with both endpoints known (inverse injection). Evaluates `f`
/// exactly `tab.stages()` times; no nonlinear solve. If `stages_out` is
/// non-null the stage values k_i are stored there.
template <class Field>
State mirk_injected_step(const MirkTableau& tab, Field&& f, const State& y_n,
                         const State& y_np1, double h,
                         std::vector<State>* stages_out = nullptr) {
  if (!(h > 0.0)) throw InvalidArgument("mirk_injected_step: h must be positive");
  if (y_n.size() != y_np1.size())
    throw InvalidArgument("mirk_injected_step: endpoint dimensions differ");
  const auto s = tab.stages();
  std::vector<State> k;
  k.reserve(s);
  const State delta = y_np1 - y_n;
  State out = y_n;
  for (Eigen::Index i = 0; i < s; ++i) {
    State x = y_n + tab.v[i] * delta;
    for (Eigen::Index j = 0; j < i; ++j)
      if (tab.d(i, j) != 0.0) x += (h * tab.d(i, j)) * k[j];
    k.push_back(f(x));
    detail::require_finite(k.back(), "mirk_injected_step", static_cast<long>(i));
  }
  for (Eigen::Index i = 0; i < s; ++i) out += (h * tab.b[i]) * k[i];
  detail::require_finite(out, "mirk_injected_step", static_cast<long>(s));
  if (stages_out) *stages_out = std::move(k);
  return out;
}

/// Forward (implicit) MIRK step solved by fixed-point iteration on y_{n+1},
/// starting from an explicit Euler predictor. Converged when successive
/// iterates differ by less than `tol` in the max-norm.
template <class Field>
State mirk_forward_step(const MirkTableau& tab, Field&& f, const State& y_n, double h,
                        double tol = 1e-14, int max_iterations = 100) {
  if (!(tol > 0.0)) throw InvalidArgument("mirk_forward_step: tol must be positive");
  State guess = y_n + h * f(y_n);
  double change = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    State next = mirk_injected_step(tab, f, y_n, guess, h);
    change = (next - guess).lpNorm<Eigen::Infinity>();
    guess = std::move(next);
    if (change < tol) return guess;
  }
  throw NoConvergence("mirk_forward_step: fixed-point iteration did not converge (" +
                          tab.name + ", last change " + std::to_string(change) + ")",
                      change);
}

template <class Field>
State explicit_step(const ExplicitTableau& tab, Field&& f, const State& y_n, double h) {
  const auto s = tab.stages();
  std::vector<State> k;
  k.reserve(s);
  State out = y_n;
  for (Eigen::Index i = 0; i < s; ++i) {
    State x = y_n;
    for (Eigen::Index j = 0; j < i; ++j)
      if (tab.a(i, j) != 0.0) x += (h * tab.a(i, j)) * k[j];
    k.push_back(f(x));
    detail::require_finite(k.back(), "explicit_step", static_cast<long>(i));
  }
  for (Eigen::Index i = 0; i < s; ++i) out += (h * tab.b[i]) * k[i];
  detail::require_finite(out, "explicit_step", static_cast<long>(s));
  return out;
}

}  // namespace mirkhnn
