#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

/// Mono-implicit Runge-Kutta method. The RK matrix is A = D + v b^T with D
/// strictly lower triangular, so stages are explicit once y_{n+1} is known:
///
///   k_i     = f(y_n + v_i (y_{n+1} - y_n) + h sum_{j<i} d_ij k_j)
///   y_{n+1} = y_n + h sum_i b_i k_i
struct MirkTableau {
  std::string name;
  int order = 0;
  Eigen::VectorXd b;
  Eigen::VectorXd v;
  Matrix d;

  Eigen::Index stages() const noexcept { return b.size(); }

  /// Butcher matrix A = D + v b^T.
  Matrix rk_matrix() const { return d + v * b.transpose(); }

  /// Abscissae c = A 1.
  Eigen::VectorXd nodes() const { return rk_matrix().rowwise().sum(); }

  void validate() const {
    const auto s = stages();
    if (s == 0 || v.size() != s || d.rows() != s || d.cols() != s)
      throw InvalidArgument("tableau " + name + ": inconsistent stage dimensions");
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = i; j < s; ++j)
        if (d(i, j) != 0.0)
          throw InvalidArgument("tableau " + name + ": D is not strictly lower triangular");
  }
};

/// Explicit Runge-Kutta method in Butcher form.
struct ExplicitTableau {
  std::string name;
  int order = 0;
  Matrix a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;

  Eigen::Index stages() const noexcept { return b.size(); }

  /// An explicit method is the MIRK method with v = 0 and D = A; under
  /// inverse injection y_{n+1} then only enters through the residual.
  MirkTableau as_mirk() const {
    return MirkTableau{name, order, b, Eigen::VectorXd::Zero(stages()), a};
  }
};

namespace detail {

inline MirkTableau make_mirk(std::string name, int order, std::vector<double> b,
                             std::vector<double> v, std::vector<std::vector<double>> d_rows) {
  const auto s = static_cast<Eigen::Index>(b.size());
  MirkTableau t{std::move(name), order, Eigen::Map<Eigen::VectorXd>(b.data(), s),
                Eigen::Map<Eigen::VectorXd>(v.data(), s), Matrix::Zero(s, s)};
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d_rows.size()); ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d_rows[i].size()); ++j)
      t.d(i, j) = d_rows[i][j];
  t.validate();
  return t;
}

}  // namespace detail

/// Implicit midpoint rule.
inline MirkTableau mirk2() { return detail::make_mirk("mirk2", 2, {1.0}, {0.5}, {{0.0}}); }

inline MirkTableau mirk3() {
  return detail::make_mirk("mirk3", 3, {1.0 / 4, 3.0 / 4}, {0.0, 4.0 / 9},
                           {{0.0, 0.0}, {2.0 / 9, 0.0}});
}

/// Symmetric, A-stable; k1 = f(y_n), k2 = f(y_{n+1}).
inline MirkTableau mirk4() {
  return detail::make_mirk("mirk4", 4, {1.0 / 6, 1.0 / 6, 2.0 / 3}, {0.0, 1.0, 0.5},
                           {{}, {}, {1.0 / 8, -1.0 / 8}});
}

inline MirkTableau mirk5() {
  return detail::make_mirk(
      "mirk5", 5, {5.0 / 54, 1.0 / 14, 32.0 / 81, 250.0 / 567},
      {0.0, 1.0, 27.0 / 32, 837.0 / 1250},
      {{}, {}, {3.0 / 64, -9.0 / 64}, {21.0 / 1000, 63.0 / 5000, -252.0 / 625}});
}

/// Symmetric; nodes (0, 1, 1/4, 3/4, 1/2) with Boole quadrature weights.
inline MirkTableau mirk6() {
  return detail::make_mirk(
      "mirk6", 6, {7.0 / 90, 7.0 / 90, 16.0 / 45, 16.0 / 45, 2.0 / 15},
      {0.0, 1.0, 5.0 / 32, 27.0 / 32, 0.5},
      {{}, {}, {9.0 / 64, -3.0 / 64}, {3.0 / 64, -9.0 / 64}, {-5.0 / 24, 5.0 / 24, 2.0 / 3, -2.0 / 3}});
}

inline std::vector<MirkTableau> builtin_tableaus() {
  return {mirk2(), mirk3(), mirk4(), mirk5(), mirk6()};
}

inline ExplicitTableau explicit_euler() {
  return ExplicitTableau{"euler", 1, Matrix::Zero(1, 1), Eigen::VectorXd::Ones(1),
                         Eigen::VectorXd::Zero(1)};
}

inline ExplicitTableau rk4() {
  Matrix a = Matrix::Zero(4, 4);
  a(1, 0) = 0.5;
  a(2, 1) = 0.5;
  a(3, 2) = 1.0;
  Eigen::VectorXd b(4), c(4);
  b << 1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6;
  c << 0.0, 0.5, 0.5, 1.0;
  return ExplicitTableau{"rk4", 4, a, b, c};
}

/// Methods accepted for training: mirk2..mirk6 and rk4 (as an injected MIRK).
inline MirkTableau training_method(std::string_view name) {
  for (auto& t : builtin_tableaus())
    if (t.name == name) return t;
  if (name == "rk4") return rk4().as_mirk();
  throw InvalidArgument("unknown method '" + std::string(name) +
                        "' (expected mirk2..mirk6 or rk4)");
}

}  // namespace mirkhnn
