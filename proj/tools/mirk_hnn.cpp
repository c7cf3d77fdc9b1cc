// mirk-hnn: generate data, train, evaluate and check integrator orders.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "mirkhnn/experiment.hpp"

namespace {

int exit_code(const mirkhnn::Error& e) {
  return e.kind() == mirkhnn::ErrorKind::invalid_argument ? 1 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn Hamiltonians from sparse trajectory samples with MIRK residuals"};
  app.require_subcommand(1);

  std::string config_path;
  mirkhnn::CommandOptions opt;
  std::optional<std::uint64_t> seed_override;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto* gen = app.add_subcommand("generate", "Sample reference trajectories");
  add_common(gen);
  auto* tr = app.add_subcommand("train", "Train one model per grid point, method and seed");
  add_common(tr);
  tr->add_option("--seed-override", seed_override, "Train only this seed");
  tr->add_flag("--resume", opt.resume, "Skip runs whose checkpoint already exists");
  auto* ev = app.add_subcommand("evaluate", "Roll out checkpoints and write results.csv");
  add_common(ev);
  ev->add_option("--seed-override", seed_override, "Evaluate only this seed");
  ev->add_flag("--strict", opt.strict, "Treat missing checkpoints and divergence as errors");
  auto* ord = app.add_subcommand("orders", "Estimate empirical convergence orders");
  add_common(ord);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  opt.seed_override = seed_override;

  try {
    const auto cfg = mirkhnn::load_experiment(config_path);
    if (gen->parsed()) {
      mirkhnn::cmd_generate(cfg, opt);
    } else if (tr->parsed()) {
      mirkhnn::cmd_train(cfg, opt, config_path);
    } else if (ev->parsed()) {
      mirkhnn::cmd_evaluate(cfg, opt);
    } else if (ord->parsed()) {
      const auto rows = mirkhnn::cmd_orders(cfg, opt);
      std::cout << mirkhnn::orders_csv(rows);
    }
  } catch (const mirkhnn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
