#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/io.hpp"
#include "mirkhnn/lbfgs.hpp"
#include "mirkhnn/loss.hpp"
#include "mirkhnn/model.hpp"
#include "mirkhnn/tableaus.hpp"
#include "mirkhnn/trajectory.hpp"

namespace mirkhnn {

struct TrainConfig {
  std::string system_name = "double_pendulum";
  std::string tableau_name = "mirk4";
  double h = 2.0;
  long n_samples = 10;  // number of transitions N
  int epochs = 100;
  int iterations_per_epoch = 20;
  int lbfgs_history = 50;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search_evals = 20;
  double grad_tol = 1e-10;
  std::uint64_t seed = 0;
  int hidden_layers = 3;
  int width = 100;

  LbfgsOptions lbfgs() const {
    LbfgsOptions o;
    o.epochs = epochs;
    o.iterations_per_epoch = iterations_per_epoch;
    o.history = lbfgs_history;
    o.c1 = c1;
    o.c2 = c2;
    o.max_line_search_evals = max_line_search_evals;
    o.grad_tol = grad_tol;
    return o;
  }

  void validate() const {
    if (!(h > 0.0)) throw InvalidArgument("train config: h must be positive");
    if (n_samples < 1) throw InvalidArgument("train config: need at least one transition");
    if (hidden_layers < 1 || width < 1)
      throw InvalidArgument("train config: network needs a positive depth and width");
    lbfgs().validate();
    training_method(tableau_name);
  }
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"system", c.system_name},
              {"tableau", c.tableau_name},
              {"h", c.h},
              {"n_samples", c.n_samples},
              {"epochs", c.epochs},
              {"iterations_per_epoch", c.iterations_per_epoch},
              {"lbfgs_history", c.lbfgs_history},
              {"c1", c.c1},
              {"c2", c.c2},
              {"max_line_search_evals", c.max_line_search_evals},
              {"grad_tol", c.grad_tol},
              {"seed", c.seed},
              {"hidden_layers", c.hidden_layers},
              {"width", c.width}};
}

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const TrainConfig& c) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char ch : to_json(c).dump()) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

inline Json to_json(const TrainReport& r) {
  return Json{{"loss_history", r.loss_history},
              {"grad_norm_history", r.grad_norm_history},
              {"final_loss", r.loss_history.empty() ? 0.0 : r.loss_history.back()},
              {"final_rms_residual",
               r.loss_history.empty() ? 0.0 : std::sqrt(r.loss_history.back())},
              {"final_grad_norm", r.final_grad_norm},
              {"epochs", r.epochs()},
              {"iterations", r.iterations},
              {"function_evals", r.function_evals},
              {"wall_time", r.wall_time},
              {"termination_reason", to_string(r.termination_reason)}};
}

/// `epoch,loss,grad_norm` rows.
inline std::string loss_history_csv(const TrainReport& r) {
  std::string out = "epoch,loss,grad_norm\n";
  for (std::size_t i = 0; i < r.loss_history.size(); ++i)
    out += std::to_string(i) + "," + format_double(r.loss_history[i]) + "," +
           format_double(r.grad_norm_history[i]) + "\n";
  return out;
}

struct Checkpoint {
  MlpHamiltonian model;
  std::uint64_t seed = 0;
  std::string tableau_name;
  std::string train_config_hash;
};

inline Json to_json(const Checkpoint& c) {
  return Json{{"layer_dims", c.model.layer_dims()},
              {"seed", c.seed},
              {"params", to_json_array(c.model.params())},
              {"tableau_name", c.tableau_name},
              {"train_config_hash", c.train_config_hash}};
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  try {
    Checkpoint c;
    c.model = MlpHamiltonian(j.at("layer_dims").get<std::vector<int>>(),
                             vector_from_json(j.at("params")));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.tableau_name = j.at("tableau_name").get<std::string>();
    c.train_config_hash = j.at("train_config_hash").get<std::string>();
    return c;
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("malformed checkpoint: ") + e.what());
  }
}

struct TrainResult {
  MlpHamiltonian model;
  TrainReport report;
};

/// Full-batch L-BFGS on the injected-MIRK interpolation loss, starting from a
/// Glorot-initialised network.
inline TrainResult train(const TrainConfig& cfg, const Trajectory& data) {
  cfg.validate();
  data.validate();
  if (data.transitions() != cfg.n_samples)
    throw InvalidArgument("train: dataset has " + std::to_string(data.transitions()) +
                          " transitions, config expects " + std::to_string(cfg.n_samples));
  if (std::abs(data.h - cfg.h) > 1e-9 * cfg.h)
    throw InvalidArgument("train: dataset step size does not match config");
  const MirkTableau tab = training_method(cfg.tableau_name);
  const auto dims =
      MlpHamiltonian::architecture(int(data.dim()), cfg.hidden_layers, cfg.width);
  const auto init = MlpHamiltonian::glorot(dims, cfg.seed);

  Objective objective = [&](const Eigen::VectorXd& theta) {
    return loss_and_param_grad(MlpHamiltonian(dims, theta), data, tab);
  };
  auto [theta, report] = lbfgs_minimize(objective, init.params(), cfg.lbfgs());
  return {MlpHamiltonian(dims, std::move(theta)), std::move(report)};
}

}  // namespace mirkhnn
