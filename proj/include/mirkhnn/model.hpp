#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/structure.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ParamVector = Eigen::VectorXd;

/// Activations and input-gradient intermediates of one evaluation, kept for
/// the second-order reverse sweep.
/// Columns are independent samples.
struct MlpTape {
  std::vector<Matrix> z;  // z[0] = input, z[l] = tanh(a_l), l = 1..L
  std::vector<Matrix> g;  // g[l] = dH/dz_l, l = 0..L
};

/// Scalar network H_theta: tanh hidden layers, linear scalar output.
///
/// Parameters live in one flat vector, layer by layer; each layer stores its
/// weight matrix (out x in, row-major) followed by its bias.
class MlpHamiltonian {
 public:
  MlpHamiltonian() = default;

  MlpHamiltonian(std::vector<int> layer_dims, ParamVector params)
      : dims_(std::move(layer_dims)), params_(std::move(params)) {
    validate_dims(dims_);
    if (params_.size() != param_count(dims_))
      throw InvalidArgument("MlpHamiltonian: expected " + std::to_string(param_count(dims_)) +
                            " parameters, got " + std::to_string(params_.size()));
  }

  static MlpHamiltonian zeros(std::vector<int> layer_dims) {
    const auto n = param_count(layer_dims);
    return MlpHamiltonian(std::move(layer_dims), ParamVector::Zero(n));
  }

  /// Glorot-uniform weights, zero biases.
  static MlpHamiltonian glorot(std::vector<int> layer_dims, std::uint64_t seed) {
    auto m = zeros(std::move(layer_dims));
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < m.dims_.size(); ++l) {
      const double limit = std::sqrt(6.0 / double(m.dims_[l] + m.dims_[l + 1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      auto w = m.weight(l);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    }
    return m;
  }

  /// [input, width x hidden, 1]
  static std::vector<int> architecture(int input_dim, int hidden_layers, int width) {
    std::vector<int> dims{input_dim};
    for (int i = 0; i < hidden_layers; ++i) dims.push_back(width);
    dims.push_back(1);
    return dims;
  }

  static Eigen::Index param_count(const std::vector<int>& dims) {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      n += Eigen::Index(dims[l]) * dims[l + 1] + dims[l + 1];
    return n;
  }

  const std::vector<int>& layer_dims() const noexcept { return dims_; }
  Eigen::Index input_dim() const noexcept { return dims_.front(); }
  Eigen::Index param_count() const noexcept { return params_.size(); }
  const ParamVector& params() const noexcept { return params_; }
  void set_params(const ParamVector& p) {
    if (p.size() != params_.size()) throw InvalidArgument("MlpHamiltonian: parameter size mismatch");
    params_ = p;
  }

  std::size_t hidden_layers() const noexcept { return dims_.size() - 2; }

  Eigen::Map<const RowMatrix> weight(std::size_t l) const {
    return {params_.data() + offset(l), dims_[l + 1], dims_[l]};
  }
  Eigen::Map<RowMatrix> weight(std::size_t l) {
    return {params_.data() + offset(l), dims_[l + 1], dims_[l]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
    return {params_.data() + offset(l) + Eigen::Index(dims_[l]) * dims_[l + 1], dims_[l + 1]};
  }
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l) {
    return {params_.data() + offset(l) + Eigen::Index(dims_[l]) * dims_[l + 1], dims_[l + 1]};
  }

  /// Offset of layer l's weight block in the flat parameter vector.
  Eigen::Index offset(std::size_t l) const {
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < l; ++k) off += Eigen::Index(dims_[k]) * dims_[k + 1] + dims_[k + 1];
    return off;
  }

  double eval(const State& y) const {
    check_input(y);
    Eigen::VectorXd z = y;
    const std::size_t L = hidden_layers();
    for (std::size_t l = 0; l < L; ++l)
      z = (weight(l) * z + bias(l)).array().tanh().matrix();
    return (weight(L) * z)(0) + bias(L)(0);
  }

  /// grad_y H_theta(y) by a reverse sweep.
  State input_grad(const State& y) const {
    check_input(y);
    MlpTape t;
    return input_grad_batch(y, t).col(0);
  }

  /// Column-wise input gradients of a batch of states; fills `t` for the
  /// second-order sweep.
  Matrix input_grad_batch(const Matrix& y, MlpTape& t) const {
    if (y.rows() != input_dim())
      throw InvalidArgument("MlpHamiltonian: batch rows " + std::to_string(y.rows()) +
                            ", expected " + std::to_string(input_dim()));
    const std::size_t L = hidden_layers();
    t.z.resize(L + 1);
    t.g.resize(L + 1);
    t.z[0] = y;
    for (std::size_t l = 1; l <= L; ++l) {
      t.z[l].noalias() = weight(l - 1) * t.z[l - 1];
      t.z[l].colwise() += bias(l - 1);
      t.z[l] = t.z[l].array().tanh().matrix();
    }
    t.g[L] = weight(L).row(0).transpose().replicate(1, y.cols());
    for (std::size_t l = L; l >= 1; --l) {
      const Matrix delta = t.g[l].cwiseProduct(sech2(t.z[l]));
      t.g[l - 1].noalias() = weight(l - 1).transpose() * delta;
    }
    return t.g[0];
  }

  /// f_theta(y) = J grad_y H_theta(y).
  State vector_field(const State& y) const {
    return StructureMatrix(input_dim() / 2).apply(input_grad(y));
  }

  /// Reverse-mode sweep through the input-gradient computation. Given the
  /// cotangents `u` (one column per sample) of g = grad_y H_theta recorded in
  /// `t`, returns (d g / d y)^T u column-wise (Hessian-vector products) and
  /// accumulates (d g / d theta)^T u, summed over columns, into theta_bar.
  Matrix input_grad_vjp(const MlpTape& t, const Matrix& u,
                        Eigen::Ref<Eigen::VectorXd> theta_bar) const {
    const std::size_t L = hidden_layers();
    std::vector<Matrix> s(L + 1), z_bar(L + 1);

    // Adjoint of the backward (gradient) pass, walked from the input upward.
    Matrix g_bar = u;
    for (std::size_t l = 1; l <= L; ++l) {
      s[l] = sech2(t.z[l]);
      const Matrix delta = t.g[l].cwiseProduct(s[l]);
      weight_grad(theta_bar, l - 1).noalias() += delta * g_bar.transpose();
      Matrix delta_bar = weight(l - 1) * g_bar;
      z_bar[l] = -2.0 * t.z[l].cwiseProduct(delta_bar.cwiseProduct(t.g[l]));
      g_bar = delta_bar.cwiseProduct(s[l]);
    }
    weight_grad(theta_bar, L).row(0) += g_bar.rowwise().sum().transpose();

    // Adjoint of the forward pass, walked back down to the input.
    Matrix x_bar;
    for (std::size_t l = L; l >= 1; --l) {
      const Matrix a_bar = z_bar[l].cwiseProduct(s[l]);
      weight_grad(theta_bar, l - 1).noalias() += a_bar * t.z[l - 1].transpose();
      bias_grad(theta_bar, l - 1) += a_bar.rowwise().sum();
      if (l > 1) z_bar[l - 1].noalias() += weight(l - 1).transpose() * a_bar;
      else x_bar.noalias() = weight(0).transpose() * a_bar;
    }
    return x_bar;
  }

 private:
  static Matrix sech2(const Matrix& z) { return (1.0 - z.array().square()).matrix(); }

  Eigen::Map<RowMatrix> weight_grad(Eigen::Ref<Eigen::VectorXd> g, std::size_t l) const {
    return {g.data() + offset(l), dims_[l + 1], dims_[l]};
  }
  Eigen::Map<Eigen::VectorXd> bias_grad(Eigen::Ref<Eigen::VectorXd> g, std::size_t l) const {
    return {g.data() + offset(l) + Eigen::Index(dims_[l]) * dims_[l + 1], dims_[l + 1]};
  }

  static void validate_dims(const std::vector<int>& dims) {
    if (dims.size() < 3) throw InvalidArgument("MlpHamiltonian: need at least one hidden layer");
    for (int d : dims)
      if (d <= 0) throw InvalidArgument("MlpHamiltonian: layer widths must be positive");
    if (dims.back() != 1) throw InvalidArgument("MlpHamiltonian: output must be scalar");
  }

  void check_input(const State& y) const {
    if (y.size() != input_dim())
      throw InvalidArgument("MlpHamiltonian: input of dimension " + std::to_string(y.size()) +
                            ", expected " + std::to_string(input_dim()));
  }

  std::vector<int> dims_;
  ParamVector params_;
};

}  // namespace mirkhnn
