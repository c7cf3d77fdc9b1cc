#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "mirkhnn/experiment.hpp"

using namespace mirkhnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mirkhnn_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small config that trains in well under a second per run.
ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c = load_experiment(fs::path(MIRKHNN_PRESET_DIR) / "dp.json");
  c.grid = {{2.0, 10}};
  c.tableaus = {"mirk2", "mirk4"};
  c.seeds = {0};
  c.output_dir = out.string();
  c.train.epochs = 2;
  c.train.iterations_per_epoch = 2;
  c.train.hidden_layers = 1;
  c.train.width = 8;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MIRKHNN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, PresetsLoadAndValidate) {
  for (const char* name : {"dp.json", "fput.json"}) {
    const auto c = load_experiment(fs::path(MIRKHNN_PRESET_DIR) / name);
    EXPECT_TRUE(c.validate().empty()) << name;
    EXPECT_EQ(c.grid.size(), 3u);
    EXPECT_EQ(c.tableaus.size(), 6u);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  }
}

TEST(Config, RoundTrip) {
  for (const char* name : {"dp.json", "fput.json"}) {
    const Json original = read_json(fs::path(MIRKHNN_PRESET_DIR) / name);
    EXPECT_EQ(to_json(experiment_from_json(original)), original) << name;
  }
  auto c = load_experiment(fs::path(MIRKHNN_PRESET_DIR) / "dp.json");
  c.orders = OrderPlan{};
  EXPECT_EQ(to_json(experiment_from_json(to_json(c))), to_json(c));
}

TEST(Config, Validation) {
  const auto base = load_experiment(fs::path(MIRKHNN_PRESET_DIR) / "dp.json");
  auto c = base;
  c.tableaus.clear();
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = base;
  c.tableaus = {"mirk7"};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = base;
  c.grid = {{1.0, 10}};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.preset = false;
  EXPECT_EQ(c.validate().size(), 1u);
  c = base;
  c.initial_value = State::Zero(3);
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = base;
  c.seeds.clear();
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(experiment_from_json(Json::parse(R"({"system": "fput"})")), InvalidArgument);
}

TEST(Generate, FilesAndDeterminism) {
  const auto dir = scratch("generate");
  auto c = load_experiment(fs::path(MIRKHNN_PRESET_DIR) / "fput.json");
  c.output_dir = dir.string();
  std::ostringstream log;
  CommandOptions opt;
  opt.log = &log;
  const auto files = cmd_generate(c, opt);
  ASSERT_EQ(files.size(), 3u);
  const RunPaths paths{dir};
  const auto traj = trajectory_from_csv(read_text(paths.dataset_csv("fput", {0.5, 40})));
  EXPECT_EQ(traj.states.size(), 41u);
  const auto meta = read_json(paths.dataset_meta("fput", {0.5, 40}));
  EXPECT_LT(meta.at("energy_drift").get<double>(), 1e-9);
  EXPECT_EQ(meta.at("N").get<long>(), 40);

  const auto first = read_text(files[0]);
  cmd_generate(c, opt);
  EXPECT_EQ(read_text(files[0]), first);
}

TEST(Generate, DoublePendulumCoarseGridHasElevenRows) {
  const auto dir = scratch("generate_dp");
  auto c = tiny_config(dir);
  std::ostringstream log;
  CommandOptions opt;
  opt.log = &log;
  cmd_generate(c, opt);
  const auto text = read_text(RunPaths{dir}.dataset_csv(c.system, {2.0, 10}));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);  // header + 11 samples
}

TEST(Train, MissingDatasetNamesGenerate) {
  const auto dir = scratch("train_missing");
  std::ostringstream log;
  CommandOptions opt;
  opt.log = &log;
  try {
    cmd_train(tiny_config(dir), opt, "cfg.json");
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("mirk-hnn generate --config cfg.json"), std::string::npos);
  }
}

TEST(Pipeline, TrainResumeEvaluate) {
  const auto dir = scratch("pipeline");
  auto c = tiny_config(dir);
  std::ostringstream log;
  CommandOptions opt;
  opt.log = &log;
  opt.jobs = 2;
  cmd_generate(c, opt);
  EXPECT_EQ(cmd_train(c, opt).size(), 2u);

  const RunPaths paths{dir};
  const auto ckpt = paths.checkpoint(paths.run_tag(c.system, "mirk2", c.grid[0], 0));
  ASSERT_TRUE(fs::exists(ckpt));
  const auto stamp = fs::last_write_time(ckpt);
  opt.resume = true;
  EXPECT_TRUE(cmd_train(c, opt).empty());
  EXPECT_EQ(fs::last_write_time(ckpt), stamp);

  const auto rows = cmd_evaluate(c, opt);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].tableau, "mirk2");
  EXPECT_EQ(rows[1].tableau, "mirk4");
  const auto csv = read_text(paths.results_csv());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "system,tableau,h,N,seed,e_interp,e_extrap,e_H");

  // Missing checkpoint: skipped with a warning, or an error when strict.
  fs::remove(ckpt);
  EXPECT_EQ(cmd_evaluate(c, opt).size(), 1u);
  EXPECT_NE(log.str().find("missing checkpoint"), std::string::npos);
  opt.strict = true;
  EXPECT_THROW(cmd_evaluate(c, opt), InvalidArgument);
}

TEST(Pipeline, Deterministic) {
  std::string results[2];
  for (int k = 0; k < 2; ++k) {
    const auto dir = scratch("determinism" + std::to_string(k));
    auto c = tiny_config(dir);
    std::ostringstream log;
    CommandOptions opt;
    opt.log = &log;
    cmd_generate(c, opt);
    cmd_train(c, opt);
    cmd_evaluate(c, opt);
    results[k] = read_text(RunPaths{dir}.results_csv());
  }
  EXPECT_EQ(results[0], results[1]);
}

TEST(Orders, ZeroSystemDoesNotCrash) {
  const auto dir = scratch("orders_zero");
  auto c = tiny_config(dir);
  c.system = "zero";
  c.initial_value = State::Ones(4);
  c.tableaus = {"mirk4", "rk4"};
  std::ostringstream log;
  CommandOptions opt;
  opt.log = &log;
  const auto rows = cmd_orders(c, opt);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_FALSE(r.pass());
  const auto csv = read_text(RunPaths{dir}.orders_csv());
  EXPECT_NE(csv.find("unreliable fit"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("generate"), 1);  // --config missing
  EXPECT_EQ(run_cli("generate --config " + (dir / "nope.json").string()), 1);

  auto c = tiny_config(dir / "out");
  write_json(dir / "cfg.json", to_json(c));
  const std::string cfg = " --config " + (dir / "cfg.json").string();
  EXPECT_EQ(run_cli("train" + cfg), 1);  // no dataset yet
  EXPECT_EQ(run_cli("generate" + cfg), 0);
  EXPECT_EQ(run_cli("train --jobs 2 --seed-override 5" + cfg), 0);
  EXPECT_TRUE(fs::exists(RunPaths{dir / "out"}.checkpoint(
      RunPaths{}.run_tag(c.system, "mirk4", c.grid[0], 5))));
  EXPECT_EQ(run_cli("train --resume --seed-override 5" + cfg), 0);
  EXPECT_EQ(run_cli("evaluate --seed-override 5" + cfg), 0);
  EXPECT_EQ(run_cli("evaluate" + cfg), 0);  // seed 0 missing: warnings only
  EXPECT_EQ(run_cli("evaluate --strict" + cfg), 1);

  // Divergence under --strict is a numerical failure.
  const auto tag = RunPaths{}.run_tag(c.system, "mirk4", c.grid[0], 5);
  auto ck = checkpoint_from_json(read_json(RunPaths{dir / "out"}.checkpoint(tag)));
  const auto dims = ck.model.layer_dims();
  ParamVector p = ParamVector::Zero(ck.model.param_count());
  MlpHamiltonian blow(dims, p);
  blow.weight(0)(0, 0) = 1e-3;
  blow.weight(1)(0, 0) = 1e9;
  ck.model = blow;
  write_json(RunPaths{dir / "out"}.checkpoint(tag), to_json(ck));
  EXPECT_EQ(run_cli("evaluate --strict --seed-override 5" + cfg), 2);
  EXPECT_EQ(run_cli("evaluate --seed-override 5" + cfg), 0);
  const auto csv = read_text(RunPaths{dir / "out"}.results_csv());
  EXPECT_NE(csv.find("inf"), std::string::npos);
}
