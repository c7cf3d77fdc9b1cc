#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/model.hpp"
#include "mirkhnn/tableaus.hpp"
#include "mirkhnn/trajectory.hpp"

namespace mirkhnn {

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean squared interpolation residual of the injected MIRK step over all
/// transitions of `data`, with f = J grad H_theta:
///
///   loss = 1/N sum_n || y(t_{n+1}) - yhat_{n+1}(theta) ||^2
///
/// The gradient is exact: reverse mode through the stage recursion and,
/// for each stage, through the input-gradient computation of the network.
inline LossAndGrad loss_and_param_grad(const MlpHamiltonian& model, const Trajectory& data,
                                       const MirkTableau& tab, bool with_grad = true) {
  data.validate();
  const long n_trans = data.transitions();
  if (n_trans < 1) throw InvalidArgument("loss: dataset needs at least one transition");
  if (data.dim() != model.input_dim())
    throw InvalidArgument("loss: model input dimension does not match the data");

  const auto s = tab.stages();
  const double h = data.h;
  const StructureMatrix J(model.input_dim() / 2);
  const double inv_n = 1.0 / static_cast<double>(n_trans);

  // All transitions are processed together, one column each.
  Matrix y0(data.dim(), n_trans), y1(data.dim(), n_trans);
  for (long n = 0; n < n_trans; ++n) {
    y0.col(n) = data.states[n];
    y1.col(n) = data.states[n + 1];
  }
  const Matrix delta = y1 - y0;

  std::vector<MlpTape> tapes(s);
  std::vector<Matrix> k(s), x_bar(s);
  Matrix y_hat = y0;
  for (Eigen::Index i = 0; i < s; ++i) {
    Matrix x = y0 + tab.v[i] * delta;
    for (Eigen::Index j = 0; j < i; ++j)
      if (tab.d(i, j) != 0.0) x += (h * tab.d(i, j)) * k[j];
    k[i] = J.apply_columns(model.input_grad_batch(x, tapes[i]));
    y_hat += (h * tab.b[i]) * k[i];
  }
  const Matrix r = y1 - y_hat;

  LossAndGrad out;
  for (long n = 0; n < n_trans; ++n) {
    const double sq = r.col(n).squaredNorm();
    if (!std::isfinite(sq))
      throw NumericalOverflow("loss: non-finite residual at transition " + std::to_string(n), n);
    out.loss += sq;
  }
  out.loss *= inv_n;
  if (!with_grad) return out;

  out.grad = ParamVector::Zero(model.param_count());
  const Matrix y_hat_bar = (-2.0 * inv_n) * r;
  for (Eigen::Index i = s - 1; i >= 0; --i) {
    Matrix k_bar = (h * tab.b[i]) * y_hat_bar;
    for (Eigen::Index m = i + 1; m < s; ++m)
      if (tab.d(m, i) != 0.0) k_bar += (h * tab.d(m, i)) * x_bar[m];
    x_bar[i] = model.input_grad_vjp(tapes[i], J.apply_transpose_columns(k_bar), out.grad);
  }
  return out;
}

}  // namespace mirkhnn
