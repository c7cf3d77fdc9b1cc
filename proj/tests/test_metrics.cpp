#include <gtest/gtest.h>

#include <cmath>

#include "mirkhnn/metrics.hpp"

using namespace mirkhnn;

namespace {

const HamiltonianSystem kDp = HamiltonianSystem::double_pendulum();

Trajectory dp_truth() {
  return test_truth(kDp, benchmark_initial_value(SystemName::double_pendulum), 2.0, 10);
}

}  // namespace

TEST(Metrics, TestGrid) {
  EXPECT_DOUBLE_EQ(test_step(2.0), 0.1);
  EXPECT_EQ(test_steps(10), 800);
  EXPECT_EQ(test_steps(40), 3200);
  EXPECT_EQ(test_steps(10, 2.0), 400);
  const auto truth = dp_truth();
  EXPECT_EQ(truth.transitions(), 800);
  EXPECT_NEAR(truth.time(800), 80.0, 1e-12);
}

TEST(Metrics, WindowsShareTheirBoundary) {
  EXPECT_TRUE(in_window(20.0, kInterpolationWindow, 0.1));
  EXPECT_TRUE(in_window(20.0, kExtrapolationWindow, 0.1));
  EXPECT_TRUE(in_window(0.0, kInterpolationWindow, 0.1));
  EXPECT_FALSE(in_window(20.1, kInterpolationWindow, 0.1));
  EXPECT_FALSE(in_window(19.9, kExtrapolationWindow, 0.1));
}

TEST(Metrics, FlowErrorOfIdenticalTrajectoriesIsZero) {
  const auto truth = dp_truth();
  EXPECT_EQ(flow_error(truth, truth, kInterpolationWindow), 0.0);
  EXPECT_EQ(flow_error(truth, truth, kExtrapolationWindow), 0.0);
}

TEST(Metrics, ConstantOffset) {
  const auto truth = dp_truth();
  auto shifted = truth;
  const double delta = -0.03;
  for (auto& y : shifted.states) y.array() += delta;
  EXPECT_NEAR(flow_error(shifted, truth, kInterpolationWindow), 2 * std::abs(delta), 1e-15);
}

TEST(Metrics, GridMismatchThrows) {
  const auto truth = dp_truth();
  auto other = truth;
  other.h *= 2.0;
  EXPECT_THROW(flow_error(other, truth, kInterpolationWindow), InvalidArgument);
  other = truth;
  other.states.pop_back();
  EXPECT_THROW(flow_error(other, truth, kInterpolationWindow), InvalidArgument);
}

TEST(Metrics, ZeroModelRolloutIsConstant) {
  const auto m = MlpHamiltonian::zeros({4, 10, 1});
  const State y0 = benchmark_initial_value(SystemName::double_pendulum);
  const auto ro = rollout(m, y0, 0.1, 50);
  ASSERT_EQ(ro.states.size(), 51u);
  for (const auto& y : ro.states) EXPECT_EQ((y - y0).norm(), 0.0);
}

TEST(Metrics, ZeroModelFlowErrorByDirectSummation) {
  const auto truth = dp_truth();
  const auto m = MlpHamiltonian::zeros({4, 10, 1});
  const auto r = evaluate(m, kDp, truth);
  double sum = 0.0;
  for (long n = 0; n <= 200; ++n) sum += (truth.states[n] - truth.states[0]).norm();
  EXPECT_NEAR(r.e_interp, sum / 201.0, 1e-14);
  sum = 0.0;
  for (long n = 200; n <= 800; ++n) sum += (truth.states[n] - truth.states[0]).norm();
  EXPECT_NEAR(r.e_extrap, sum / 601.0, 1e-14);
}

TEST(Metrics, ZeroModelHamiltonianError) {
  const auto truth = dp_truth();
  std::vector<double> h;
  for (const auto& y : truth.states) h.push_back(kDp.energy(y));
  double mean = 0.0;
  for (double x : h) mean += x;
  mean /= double(h.size());
  double mad = 0.0;
  for (double x : h) mad += std::abs(x - mean);
  mad /= double(h.size());
  EXPECT_NEAR(hamiltonian_error(MlpHamiltonian::zeros({4, 10, 1}), kDp, truth), mad, 1e-15);
}

TEST(Metrics, ExactHamiltonianUpToConstant) {
  const auto truth = dp_truth();
  auto shifted = [](const State& y) { return kDp.energy(y) + 12.5; };
  EXPECT_LE(hamiltonian_error(shifted, kDp, truth), 1e-14);
}

TEST(Metrics, LinearPerturbationBySummation) {
  const auto truth = dp_truth();
  const double eps = 1e-3;
  auto perturbed = [eps](const State& y) { return kDp.energy(y) + eps * y[0]; };
  double mean = 0.0;
  for (const auto& y : truth.states) mean += -eps * y[0];
  mean /= double(truth.states.size());
  double mad = 0.0;
  for (const auto& y : truth.states) mad += std::abs(-eps * y[0] - mean);
  mad /= double(truth.states.size());
  const double e = hamiltonian_error(perturbed, kDp, truth);
  EXPECT_GT(e, 0.0);
  EXPECT_NEAR(e, mad, 1e-15);
}

TEST(Metrics, GaugeInvariance) {
  const auto truth = dp_truth();
  const auto m = MlpHamiltonian::glorot({4, 100, 100, 100, 1}, 0);
  const double base = hamiltonian_error(m, kDp, truth);
  for (double c : {-1e3, -1.0, 0.5, 7.0, 1e3}) {
    auto moved = m;
    moved.bias(3)[0] += c;
    EXPECT_LT(std::abs(hamiltonian_error(moved, kDp, truth) - base), 1e-12) << c;
  }
}

TEST(Metrics, ExactFieldGivesTinyErrors) {
  const auto truth = dp_truth();
  const auto r = evaluate_field([](const State& y) { return kDp.vector_field(y); },
                                [](const State& y) { return kDp.energy(y); }, kDp, truth);
  EXPECT_LT(r.e_interp, 1e-8);
  EXPECT_LT(r.e_hamiltonian, 1e-12);
  EXPECT_DOUBLE_EQ(r.extrap.end, 80.0);
}

TEST(Metrics, DivergingRolloutThrows) {
  // Inverted oscillator, grows like exp(10 t).
  auto field = [](const State& y) {
    State f(4);
    f << y[2], y[3], 100.0 * y[0], 100.0 * y[1];
    return f;
  };
  const auto truth = dp_truth();
  EXPECT_THROW(evaluate_field(field, [](const State&) { return 0.0; }, kDp, truth), Divergence);
}
