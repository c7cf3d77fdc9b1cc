#pragma once

#include "mirkhnn/errors.hpp"
#include "mirkhnn/types.hpp"

namespace mirkhnn {

/// Canonical symplectic matrix J = [[0, I], [-I, 0]] of size 2d x 2d,
/// acting on states ordered (q, p).
class StructureMatrix {
 public:
  explicit StructureMatrix(Eigen::Index dim_half) : d_(dim_half) {
    if (d_ <= 0) throw InvalidArgument("StructureMatrix: dim_half must be positive");
  }

  Eigen::Index dim_half() const noexcept { return d_; }
  Eigen::Index dim() const noexcept { return 2 * d_; }

  Matrix matrix() const {
    Matrix j = Matrix::Zero(dim(), dim());
    j.topRightCorner(d_, d_).setIdentity();
    j.bottomLeftCorner(d_, d_) = -Matrix::Identity(d_, d_);
    return j;
  }

  /// J * g without forming J.
  template <class Derived>
  State apply(const Eigen::MatrixBase<Derived>& g) const {
    check(g.size());
    State out(dim());
    out.head(d_) = g.tail(d_);
    out.tail(d_) = -g.head(d_);
    return out;
  }

  /// J^T * u = -J * u; the adjoint used when back-propagating through f = J g.
  template <class Derived>
  State apply_transpose(const Eigen::MatrixBase<Derived>& u) const {
    check(u.size());
    State out(dim());
    out.head(d_) = -u.tail(d_);
    out.tail(d_) = u.head(d_);
    return out;
  }

  /// J applied to every column of `g`.
  Matrix apply_columns(const Matrix& g) const {
    check(g.rows());
    Matrix out(g.rows(), g.cols());
    out.topRows(d_) = g.bottomRows(d_);
    out.bottomRows(d_) = -g.topRows(d_);
    return out;
  }

  /// J^T applied to every column of `u`.
  Matrix apply_transpose_columns(const Matrix& u) const {
    check(u.rows());
    Matrix out(u.rows(), u.cols());
    out.topRows(d_) = -u.bottomRows(d_);
    out.bottomRows(d_) = u.topRows(d_);
    return out;
  }

 private:
  void check(Eigen::Index n) const {
    if (n != dim()) throw InvalidArgument("StructureMatrix: dimension mismatch");
  }
  Eigen::Index d_;
};

}  // namespace mirkhnn
