#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/loss.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

using Objective = std::function<LossAndGrad(const Eigen::VectorXd&)>;

struct LbfgsOptions {
  int epochs = 100;
  int iterations_per_epoch = 1;  // L-BFGS iterations per epoch
  int history = 50;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search_evals = 20;
  double grad_tol = 1e-10;  // on the max-norm of the gradient
  double curvature_eps = 1e-12;

  void validate() const {
    if (epochs < 1) throw InvalidArgument("lbfgs: epochs must be >= 1");
    if (iterations_per_epoch < 1)
      throw InvalidArgument("lbfgs: iterations_per_epoch must be >= 1");
    if (history < 1) throw InvalidArgument("lbfgs: history must be >= 1");
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0))
      throw InvalidArgument("lbfgs: line search constants need 0 < c1 < c2 < 1");
    if (max_line_search_evals < 1) throw InvalidArgument("lbfgs: max_line_search_evals must be >= 1");
  }
};

enum class Termination { epochs_exhausted, grad_tol, line_search_failure };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::epochs_exhausted: return "epochs_exhausted";
    case Termination::grad_tol: return "grad_tol";
    case Termination::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

struct TrainReport {
  std::vector<double> loss_history;       // per epoch; entry 0 is the starting loss
  std::vector<double> grad_norm_history;  // max-norm, aligned with loss_history
  long iterations = 0;
  double final_grad_norm = 0.0;
  double wall_time = 0.0;  // seconds
  long function_evals = 0;
  Termination termination_reason = Termination::epochs_exhausted;

  int epochs() const noexcept { return static_cast<int>(loss_history.size()) - 1; }
};

namespace detail {

/// Minimiser of the cubic interpolating (x1, f1, g1), (x2, f2, g2), clamped
/// to [lo, hi]. Falls back to bisection when the data are not finite.
inline double cubic_minimizer(double x1, double f1, double g1, double x2, double f2, double g2,
                              double lo, double hi) {
  if (!std::isfinite(f1) || !std::isfinite(f2) || !std::isfinite(g1) || !std::isfinite(g2))
    return 0.5 * (lo + hi);
  const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
  const double d2_sq = d1 * d1 - g1 * g2;
  if (d2_sq >= 0.0) {
    const double d2 = std::sqrt(d2_sq);
    const double t = x1 <= x2 ? x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
                              : x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
    if (std::isfinite(t)) return std::min(std::max(t, lo), hi);
  }
  return 0.5 * (lo + hi);
}

struct LinePoint {
  double t = 0.0;
  double f = 0.0;
  Eigen::VectorXd g;
  double gtd = 0.0;
};

struct LineSearchResult {
  LinePoint best;
  bool wolfe = false;
  long evals = 0;
};

/// Strong-Wolfe line search: bracketing phase followed by cubic zoom.
inline LineSearchResult strong_wolfe(const Objective& obj, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& d, const LinePoint& start,
                                     double t_init, const LbfgsOptions& opt) {
  const double f0 = start.f, gtd0 = start.gtd;
  const double d_norm = d.lpNorm<Eigen::Infinity>();
  LineSearchResult res;
  auto probe = [&](double t) {
    LinePoint p;
    p.t = t;
    try {
      auto lg = obj(x + t * d);
      p.f = lg.loss;
      p.g = std::move(lg.grad);
    } catch (const NumericalOverflow&) {
      p.f = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(p.f) || !p.g.allFinite()) {
      p.f = std::numeric_limits<double>::infinity();
      p.g = Eigen::VectorXd::Zero(x.size());
      p.gtd = std::numeric_limits<double>::quiet_NaN();
    } else {
      p.gtd = p.g.dot(d);
    }
    ++res.evals;
    return p;
  };
  auto armijo_fails = [&](const LinePoint& p) {
    return !(p.f <= f0 + opt.c1 * p.t * gtd0);
  };
  auto curvature_ok = [&](const LinePoint& p) {
    return std::isfinite(p.gtd) && std::abs(p.gtd) <= -opt.c2 * gtd0;
  };

  LinePoint prev = start;
  prev.t = 0.0;
  LinePoint cur = probe(t_init);
  std::array<LinePoint, 2> bracket;
  bool bracketed = false;
  int iter = 0;
  while (iter < opt.max_line_search_evals) {
    if (armijo_fails(cur) || (iter > 1 && cur.f >= prev.f)) {
      bracket = {prev, cur};
      bracketed = true;
      break;
    }
    if (curvature_ok(cur)) {
      res.best = cur;
      res.wolfe = true;
      return res;
    }
    if (cur.gtd >= 0.0) {
      bracket = {prev, cur};
      bracketed = true;
      break;
    }
    const double lo = cur.t + 0.01 * (cur.t - prev.t), hi = cur.t * 10.0;
    const double t_next = cubic_minimizer(prev.t, prev.f, prev.gtd, cur.t, cur.f, cur.gtd, lo, hi);
    prev = cur;
    cur = probe(t_next);
    ++iter;
  }
  if (!bracketed) {
    // Evaluation budget spent while still extrapolating; keep the best descent point.
    res.best = cur.f < prev.f ? cur : prev;
    return res;
  }

  bool insufficient_progress = false;
  int low = bracket[0].f <= bracket[1].f ? 0 : 1;
  while (iter < opt.max_line_search_evals) {
    const int high = 1 - low;
    const double b_lo = std::min(bracket[0].t, bracket[1].t);
    const double b_hi = std::max(bracket[0].t, bracket[1].t);
    if ((b_hi - b_lo) * d_norm < 1e-15) break;
    double t = cubic_minimizer(bracket[0].t, bracket[0].f, bracket[0].gtd, bracket[1].t,
                               bracket[1].f, bracket[1].gtd, b_lo, b_hi);
    const double eps = 0.1 * (b_hi - b_lo);
    if (std::min(b_hi - t, t - b_lo) < eps) {
      if (insufficient_progress || t >= b_hi || t <= b_lo) {
        t = std::abs(t - b_hi) < std::abs(t - b_lo) ? b_hi - eps : b_lo + eps;
        insufficient_progress = false;
      } else {
        insufficient_progress = true;
      }
    } else {
      insufficient_progress = false;
    }
    LinePoint p = probe(t);
    ++iter;
    if (armijo_fails(p) || p.f >= bracket[low].f) {
      bracket[high] = std::move(p);
      low = bracket[0].f <= bracket[1].f ? 0 : 1;
    } else {
      if (curvature_ok(p)) {
        res.best = std::move(p);
        res.wolfe = true;
        return res;
      }
      if (p.gtd * (bracket[high].t - bracket[low].t) >= 0.0) bracket[high] = bracket[low];
      bracket[low] = std::move(p);
    }
  }
  res.best = bracket[low];
  return res;
}

}  // namespace detail

/// Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search.
/// Each epoch runs up to `iterations_per_epoch` quasi-Newton iterations.
inline std::pair<Eigen::VectorXd, TrainReport> lbfgs_minimize(const Objective& objective,
                                                              Eigen::VectorXd x0,
                                                              const LbfgsOptions& opt) {
  opt.validate();
  const auto clock_start = std::chrono::steady_clock::now();
  TrainReport report;
  Eigen::VectorXd x = std::move(x0);

  LossAndGrad lg = objective(x);
  ++report.function_evals;
  if (!std::isfinite(lg.loss) || !lg.grad.allFinite())
    throw NumericalOverflow("lbfgs: objective is not finite at the starting point", 0);
  detail::LinePoint cur{0.0, lg.loss, std::move(lg.grad), 0.0};

  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> alpha;

  auto record = [&] {
    report.loss_history.push_back(cur.f);
    report.grad_norm_history.push_back(cur.g.lpNorm<Eigen::Infinity>());
  };
  record();

  // One quasi-Newton iteration; returns false when the run must stop.
  auto iterate = [&]() -> bool {
    if (cur.g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      report.termination_reason = Termination::grad_tol;
      return false;
    }
    // Two-loop recursion: d = -H_k g.
    Eigen::VectorXd d = -cur.g;
    alpha.assign(memory.size(), 0.0);
    for (std::size_t i = memory.size(); i-- > 0;) {
      alpha[i] = memory[i].rho * memory[i].s.dot(d);
      d -= alpha[i] * memory[i].y;
    }
    if (!memory.empty()) {
      const auto& last = memory.back();
      d *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const double beta = memory[i].rho * memory[i].y.dot(d);
      d += (alpha[i] - beta) * memory[i].s;
    }
    cur.gtd = cur.g.dot(d);
    if (!(cur.gtd < 0.0)) {
      memory.clear();
      d = -cur.g;
      cur.gtd = cur.g.dot(d);
    }
    const double t_init =
        report.iterations == 0 ? std::min(1.0, 1.0 / cur.g.lpNorm<1>()) : 1.0;

    auto ls = detail::strong_wolfe(objective, x, d, cur, t_init, opt);
    report.function_evals += ls.evals;
    detail::LinePoint next = std::move(ls.best);
    if (!(next.t > 0.0) || !std::isfinite(next.f) || !(next.f < cur.f)) {
      report.termination_reason = Termination::line_search_failure;
      return false;
    }
    Eigen::VectorXd s = next.t * d;
    Eigen::VectorXd y = next.g - cur.g;
    const double ys = y.dot(s);
    x += s;
    if (ys > opt.curvature_eps) {
      if (static_cast<int>(memory.size()) == opt.history) memory.pop_front();
      memory.push_back({std::move(s), std::move(y), 1.0 / ys});
    }
    cur = std::move(next);
    ++report.iterations;
    return true;
  };

  report.termination_reason = Termination::epochs_exhausted;
  bool running = true;
  for (int epoch = 0; epoch < opt.epochs && running; ++epoch) {
    const long before = report.iterations;
    for (int i = 0; i < opt.iterations_per_epoch && running; ++i) running = iterate();
    if (report.iterations > before) record();
  }
  if (running && cur.g.lpNorm<Eigen::Infinity>() <= opt.grad_tol)
    report.termination_reason = Termination::grad_tol;

  report.final_grad_norm = cur.g.lpNorm<Eigen::Infinity>();
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return {std::move(x), std::move(report)};
}

}  // namespace mirkhnn
