#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mirkhnn/hamiltonians.hpp"
#include "mirkhnn/lbfgs.hpp"
#include "mirkhnn/reference_solver.hpp"
#include "mirkhnn/training.hpp"

using namespace mirkhnn;

namespace {

Objective quadratic(const Eigen::VectorXd& c) {
  return [c](const Eigen::VectorXd& x) {
    return LossAndGrad{0.5 * (x - c).squaredNorm(), x - c};
  };
}

LossAndGrad rosenbrock(const Eigen::VectorXd& x) {
  const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
  Eigen::VectorXd g(2);
  g << -2.0 * a - 400.0 * x[0] * b, 200.0 * b;
  return {a * a + 100.0 * b * b, g};
}

void expect_descent(const TrainReport& r) {
  for (std::size_t k = 1; k < r.loss_history.size(); ++k)
    EXPECT_LE(r.loss_history[k], r.loss_history[k - 1] + 1e-15) << "epoch " << k;
}

}  // namespace

TEST(Lbfgs, QuadraticConvergesInThreeEpochs) {
  Eigen::VectorXd c(5);
  c << 1.0, -2.0, 3.0, 0.5, -0.25;
  LbfgsOptions opt;
  opt.epochs = 3;
  auto [x, report] = lbfgs_minimize(quadratic(c), Eigen::VectorXd::Zero(5), opt);
  EXPECT_LE((x - c).lpNorm<Eigen::Infinity>(), 1e-10);
  expect_descent(report);
}

TEST(Lbfgs, Rosenbrock) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opt;
  opt.epochs = 100;
  auto [x, report] = lbfgs_minimize(rosenbrock, x0, opt);
  EXPECT_LT(report.loss_history.back(), 1e-8);
  EXPECT_NEAR(x[0], 1.0, 1e-3);
  EXPECT_NEAR(x[1], 1.0, 1e-3);
  expect_descent(report);
}

TEST(Lbfgs, ZeroGradientStopsAtEpochZero) {
  Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 0.7);
  auto [x, report] = lbfgs_minimize(quadratic(c), c, LbfgsOptions{});
  EXPECT_EQ(report.epochs(), 0);
  EXPECT_EQ(report.iterations, 0);
  EXPECT_EQ(report.termination_reason, Termination::grad_tol);
  EXPECT_EQ(x, c);
}

TEST(Lbfgs, EpochsExhausted) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opt;
  opt.epochs = 4;
  auto [x, report] = lbfgs_minimize(rosenbrock, x0, opt);
  EXPECT_EQ(report.epochs(), 4);
  EXPECT_EQ(report.termination_reason, Termination::epochs_exhausted);
  EXPECT_EQ(report.loss_history.size(), report.grad_norm_history.size());
}

TEST(Lbfgs, IterationsPerEpoch) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opt;
  opt.epochs = 2;
  opt.iterations_per_epoch = 5;
  auto [x, report] = lbfgs_minimize(rosenbrock, x0, opt);
  EXPECT_EQ(report.iterations, 10);
  EXPECT_EQ(report.epochs(), 2);
}

TEST(Lbfgs, NonFiniteStartThrows) {
  Objective bad = [](const Eigen::VectorXd& x) {
    return LossAndGrad{std::numeric_limits<double>::quiet_NaN(), x};
  };
  EXPECT_THROW(lbfgs_minimize(bad, Eigen::VectorXd::Ones(2), LbfgsOptions{}), NumericalOverflow);
}

TEST(Lbfgs, NonFiniteRegionIsBacktracked) {
  // Finite only for x < 2; minimum of the quadratic part sits at x = 1.5.
  Objective wall = [](const Eigen::VectorXd& x) {
    if (x[0] >= 2.0) return LossAndGrad{std::numeric_limits<double>::infinity(), x};
    Eigen::VectorXd g(1);
    g << x[0] - 1.5;
    return LossAndGrad{0.5 * (x[0] - 1.5) * (x[0] - 1.5), g};
  };
  LbfgsOptions opt;
  opt.epochs = 20;
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, -10.0);
  auto [x, report] = lbfgs_minimize(wall, x0, opt);
  EXPECT_NEAR(x[0], 1.5, 1e-8);
}

TEST(Lbfgs, RejectsBadOptions) {
  LbfgsOptions opt;
  opt.c1 = 0.95;
  EXPECT_THROW(opt.validate(), InvalidArgument);
  opt = {};
  opt.epochs = 0;
  EXPECT_THROW(opt.validate(), InvalidArgument);
}

TEST(Train, TrivialDatasetHasZeroLoss) {
  TrainConfig cfg;
  cfg.h = 1.0;
  cfg.n_samples = 1;
  const State y0 = benchmark_initial_value(SystemName::double_pendulum);
  const Trajectory data{0.0, 1.0, {y0, y0}, "double_pendulum"};
  // Zero network reproduces a constant trajectory exactly.
  const auto zero = MlpHamiltonian::zeros(MlpHamiltonian::architecture(4, 3, 100));
  EXPECT_EQ(loss_and_param_grad(zero, data, mirk4()).loss, 0.0);
  auto [x, report] = lbfgs_minimize(
      [&](const Eigen::VectorXd& p) {
        return loss_and_param_grad(MlpHamiltonian(zero.layer_dims(), p), data, mirk4());
      },
      zero.params(), cfg.lbfgs());
  EXPECT_EQ(report.loss_history.front(), 0.0);
  EXPECT_EQ(report.epochs(), 0);
}

TEST(Train, SameSeedSameHistory) {
  TrainConfig cfg;
  cfg.tableau_name = "mirk4";
  cfg.epochs = 3;
  cfg.iterations_per_epoch = 2;
  cfg.hidden_layers = 2;
  cfg.width = 16;
  const auto data = reference_solve(HamiltonianSystem::double_pendulum(),
                                    benchmark_initial_value(SystemName::double_pendulum), 20.0, 2.0);
  const auto a = train(cfg, data);
  const auto b = train(cfg, data);
  EXPECT_EQ(a.report.loss_history, b.report.loss_history);
  EXPECT_EQ(a.model.params(), b.model.params());
  expect_descent(a.report);
  EXPECT_LT(a.report.loss_history.back(), a.report.loss_history.front());
}

TEST(Train, MismatchedDataThrows) {
  TrainConfig cfg;
  cfg.h = 1.0;
  cfg.n_samples = 10;
  const auto data = reference_solve(HamiltonianSystem::double_pendulum(),
                                    benchmark_initial_value(SystemName::double_pendulum), 20.0, 2.0);
  EXPECT_THROW(train(cfg, data), InvalidArgument);
}

TEST(Train, CheckpointRoundTrip) {
  const auto m = MlpHamiltonian::glorot({4, 8, 8, 1}, 3);
  const Checkpoint c{m, 3, "mirk5", "abc"};
  const auto back = checkpoint_from_json(Json::parse(to_json(c).dump()));
  EXPECT_EQ(back.model.params(), m.params());
  EXPECT_EQ(back.model.layer_dims(), m.layer_dims());
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.tableau_name, "mirk5");
  EXPECT_EQ(back.train_config_hash, "abc");
}
