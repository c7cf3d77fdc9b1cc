#pragma once

#include <Eigen/Core>
#include <functional>

namespace mirkhnn {

using State = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Autonomous vector field y' = f(y).
using VectorField = std::function<State(const State&)>;

}  // namespace mirkhnn
