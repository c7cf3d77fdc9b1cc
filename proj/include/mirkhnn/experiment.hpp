#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mirkhnn/errors.hpp"
#include "mirkhnn/hamiltonians.hpp"
#include "mirkhnn/io.hpp"
#include "mirkhnn/metrics.hpp"
#include "mirkhnn/order.hpp"
#include "mirkhnn/reference_solver.hpp"
#include "mirkhnn/tableaus.hpp"
#include "mirkhnn/training.hpp"

namespace mirkhnn {

namespace fs = std::filesystem;

struct GridPoint {
  double h = 0.0;
  long n = 0;
};

/// Step sizes used by the order-verification command.
struct OrderPlan {
  std::vector<double> forward_h{0.4, 0.2, 0.1, 0.05};
  double horizon = 1.6;            // fixed end time for the forward (global) error
  std::vector<double> local_h;     // one-step ladders; empty means per-method default
};

struct ExperimentConfig {
  std::string system = "double_pendulum";
  State initial_value;
  std::vector<GridPoint> grid;
  std::vector<std::string> tableaus;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  bool preset = true;  // enforce h * N = 20
  double solver_tol = 1e-12;
  double extrapolation_ratio = 4.0;
  TrainConfig train;  // per-run fields (system, tableau, h, N, seed) are filled in per run
  std::optional<OrderPlan> orders;

  HamiltonianSystem hamiltonian() const { return HamiltonianSystem::from_name(parse_system_name(system)); }

  SolverOptions solver() const {
    SolverOptions o;
    o.rtol = o.atol = solver_tol;
    return o;
  }

  /// Throws InvalidArgument on hard errors; returns warnings.
  std::vector<std::string> validate() const {
    std::vector<std::string> warnings;
    const auto sys = hamiltonian();
    if (initial_value.size() != sys.dim())
      throw InvalidArgument("config: initial_value must have " + std::to_string(sys.dim()) +
                            " entries");
    if (grid.empty()) throw InvalidArgument("config: grid is empty");
    for (const auto& g : grid) {
      if (!(g.h > 0.0) || g.n < 1) throw InvalidArgument("config: grid entries need h > 0, N >= 1");
      if (std::abs(g.h * double(g.n) - 20.0) > 1e-9) {
        if (preset)
          throw InvalidArgument("config: preset grids must satisfy h * N = 20");
        warnings.push_back("grid (" + format_double(g.h) + ", " + std::to_string(g.n) +
                           ") does not span [0, 20]");
      }
    }
    if (tableaus.empty()) throw InvalidArgument("config: tableau list is empty");
    for (const auto& t : tableaus) training_method(t);
    if (seeds.empty()) throw InvalidArgument("config: seed list is empty");
    if (output_dir.empty()) throw InvalidArgument("config: output_dir is empty");
    if (!(solver_tol > 0.0)) throw InvalidArgument("config: solver_tol must be positive");
    if (!(extrapolation_ratio >= 1.0))
      throw InvalidArgument("config: extrapolation_ratio must be >= 1");
    TrainConfig probe = train;
    probe.tableau_name = tableaus.front();
    probe.validate();
    return warnings;
  }
};

inline Json to_json(const OrderPlan& p) {
  return Json{{"forward_h", p.forward_h}, {"horizon", p.horizon}, {"local_h", p.local_h}};
}

inline Json to_json(const ExperimentConfig& c) {
  Json grid = Json::array();
  for (const auto& g : c.grid) grid.push_back({{"h", g.h}, {"N", g.n}});
  Json j{{"system", c.system},
         {"initial_value", to_json_array(c.initial_value)},
         {"grid", grid},
         {"tableaus", c.tableaus},
         {"seeds", c.seeds},
         {"output_dir", c.output_dir},
         {"preset", c.preset},
         {"solver_tol", c.solver_tol},
         {"extrapolation_ratio", c.extrapolation_ratio},
         {"train",
          {{"epochs", c.train.epochs},
           {"iterations_per_epoch", c.train.iterations_per_epoch},
           {"lbfgs_history", c.train.lbfgs_history},
           {"c1", c.train.c1},
           {"c2", c.train.c2},
           {"max_line_search_evals", c.train.max_line_search_evals},
           {"grad_tol", c.train.grad_tol},
           {"hidden_layers", c.train.hidden_layers},
           {"width", c.train.width}}}};
  if (c.orders) j["orders"] = to_json(*c.orders);
  return j;
}

inline ExperimentConfig experiment_from_json(const Json& j) {
  try {
    ExperimentConfig c;
    c.system = j.at("system").get<std::string>();
    c.initial_value = vector_from_json(j.at("initial_value"));
    for (const auto& g : j.at("grid")) {
      if (g.is_array()) c.grid.push_back({g.at(0).get<double>(), g.at(1).get<long>()});
      else c.grid.push_back({g.at("h").get<double>(), g.at("N").get<long>()});
    }
    c.tableaus = j.at("tableaus").get<std::vector<std::string>>();
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.preset = j.value("preset", true);
    c.solver_tol = j.value("solver_tol", 1e-12);
    c.extrapolation_ratio = j.value("extrapolation_ratio", 4.0);
    c.train.system_name = c.system;
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.iterations_per_epoch = t.value("iterations_per_epoch", c.train.iterations_per_epoch);
      c.train.lbfgs_history = t.value("lbfgs_history", c.train.lbfgs_history);
      c.train.c1 = t.value("c1", c.train.c1);
      c.train.c2 = t.value("c2", c.train.c2);
      c.train.max_line_search_evals = t.value("max_line_search_evals", c.train.max_line_search_evals);
      c.train.grad_tol = t.value("grad_tol", c.train.grad_tol);
      c.train.hidden_layers = t.value("hidden_layers", c.train.hidden_layers);
      c.train.width = t.value("width", c.train.width);
    }
    if (j.contains("orders")) {
      const auto& o = j.at("orders");
      OrderPlan p;
      p.forward_h = o.value("forward_h", p.forward_h);
      p.horizon = o.value("horizon", p.horizon);
      p.local_h = o.value("local_h", p.local_h);
      c.orders = p;
    }
    return c;
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_experiment(const fs::path& path) {
  return experiment_from_json(read_json(path));
}

/// Layout of everything a config produces under output_dir.
struct RunPaths {
  fs::path root;

  static std::string grid_tag(const GridPoint& g) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "h%g_N%ld", g.h, g.n);
    return buf;
  }
  std::string run_tag(const std::string& system, const std::string& tableau, const GridPoint& g,
                      std::uint64_t seed) const {
    return system + "_" + tableau + "_" + grid_tag(g) + "_seed" + std::to_string(seed);
  }
  fs::path dataset_csv(const std::string& system, const GridPoint& g) const {
    return root / "data" / (system + "_" + grid_tag(g) + ".csv");
  }
  fs::path dataset_meta(const std::string& system, const GridPoint& g) const {
    return root / "data" / (system + "_" + grid_tag(g) + ".json");
  }
  fs::path checkpoint(const std::string& tag) const { return root / "checkpoints" / (tag + ".json"); }
  fs::path train_report(const std::string& tag) const { return root / "reports" / (tag + "_train.json"); }
  fs::path loss_csv(const std::string& tag) const { return root / "reports" / (tag + "_loss.csv"); }
  fs::path eval_report(const std::string& tag) const { return root / "eval" / (tag + ".json"); }
  fs::path results_csv() const { return root / "results.csv"; }
  fs::path orders_csv() const { return root / "orders.csv"; }
};

struct CommandOptions {
  int jobs = 1;
  bool strict = false;
  bool resume = false;
  std::optional<std::uint64_t> seed_override;
  std::ostream* log = &std::cerr;
};

namespace detail {

/// Runs task(i) for i in [0, n) on `jobs` threads. Exceptions are collected
/// and the first one (by index) is rethrown after all tasks finish.
inline void run_pool(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double max_energy_drift(const HamiltonianSystem& sys, const Trajectory& traj) {
  const double h0 = sys.energy(traj.states.front());
  double drift = 0.0;
  for (const auto& y : traj.states) drift = std::max(drift, std::abs(sys.energy(y) - h0));
  return drift;
}

struct RunSpec {
  GridPoint grid;
  std::string tableau;
  std::uint64_t seed;
};

inline std::vector<RunSpec> run_matrix(const ExperimentConfig& cfg, const CommandOptions& opt) {
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (opt.seed_override) seeds = {*opt.seed_override};
  std::vector<RunSpec> runs;
  for (const auto& g : cfg.grid)
    for (const auto& t : cfg.tableaus)
      for (auto s : seeds) runs.push_back({g, t, s});
  return runs;
}

}  // namespace detail

inline Trajectory load_dataset(const RunPaths& paths, const std::string& system,
                               const GridPoint& g, const std::string& config_path) {
  const auto csv = paths.dataset_csv(system, g);
  if (!fs::exists(csv))
    throw InvalidArgument("dataset '" + csv.string() + "' not found; run `mirk-hnn generate --config " +
                          config_path + "` first");
  return trajectory_from_csv(read_text(csv), system);
}

/// Writes one trajectory CSV and metadata JSON per grid point.
inline std::vector<fs::path> cmd_generate(const ExperimentConfig& cfg, const CommandOptions& opt = {}) {
  for (const auto& w : cfg.validate()) *opt.log << "warning: " << w << "\n";
  const auto sys = cfg.hamiltonian();
  const RunPaths paths{cfg.output_dir};
  std::vector<fs::path> written;
  for (const auto& g : cfg.grid) {
    const auto traj = reference_solve(sys, cfg.initial_value, g.h * double(g.n), g.h, cfg.solver());
    const Json meta{{"system", cfg.system},
                    {"y0", to_json_array(cfg.initial_value)},
                    {"h", g.h},
                    {"N", g.n},
                    {"solver_tol", cfg.solver_tol},
                    {"energy_drift", detail::max_energy_drift(sys, traj)}};
    write_text(paths.dataset_csv(cfg.system, g), trajectory_to_csv(traj));
    write_json(paths.dataset_meta(cfg.system, g), meta);
    written.push_back(paths.dataset_csv(cfg.system, g));
    *opt.log << "generated " << paths.dataset_csv(cfg.system, g).string() << " ("
             << traj.states.size() << " samples)\n";
  }
  return written;
}

/// Trains one model per (grid, tableau, seed). Returns checkpoints written
/// by this invocation (resumed runs are skipped).
inline std::vector<fs::path> cmd_train(const ExperimentConfig& cfg, const CommandOptions& opt = {},
                                       const std::string& config_path = "<config>") {
  for (const auto& w : cfg.validate()) *opt.log << "warning: " << w << "\n";
  const RunPaths paths{cfg.output_dir};
  const auto runs = detail::run_matrix(cfg, opt);
  std::vector<Trajectory> data;
  for (const auto& g : cfg.grid) data.push_back(load_dataset(paths, cfg.system, g, config_path));

  std::vector<fs::path> written(runs.size());
  std::mutex log_mutex;
  detail::run_pool(runs.size(), opt.jobs, [&](std::size_t i) {
    const auto& run = runs[i];
    const auto tag = paths.run_tag(cfg.system, run.tableau, run.grid, run.seed);
    if (opt.resume && fs::exists(paths.checkpoint(tag))) {
      std::lock_guard lock(log_mutex);
      *opt.log << "skip " << tag << " (checkpoint exists)\n";
      return;
    }
    std::size_t gi = 0;
    while (cfg.grid[gi].h != run.grid.h || cfg.grid[gi].n != run.grid.n) ++gi;
    TrainConfig tc = cfg.train;
    tc.system_name = cfg.system;
    tc.tableau_name = run.tableau;
    tc.h = run.grid.h;
    tc.n_samples = run.grid.n;
    tc.seed = run.seed;
    auto result = train(tc, data[gi]);
    write_json(paths.checkpoint(tag),
               to_json(Checkpoint{result.model, run.seed, run.tableau, config_hash(tc)}));
    Json report = to_json(result.report);
    report.erase("wall_time");  // keep reruns byte-identical
    write_json(paths.train_report(tag), report);
    write_text(paths.loss_csv(tag), loss_history_csv(result.report));
    written[i] = paths.checkpoint(tag);
    std::lock_guard lock(log_mutex);
    *opt.log << "trained " << tag << ": loss " << result.report.loss_history.back() << " after "
             << result.report.iterations << " iterations ("
             << to_string(result.report.termination_reason) << ", "
             << result.report.wall_time << " s)\n";
  });
  std::vector<fs::path> out;
  for (auto& p : written)
    if (!p.empty()) out.push_back(p);
  return out;
}

struct ResultRow {
  std::string system;
  std::string tableau;
  GridPoint grid;
  std::uint64_t seed = 0;
  EvalReport report;
  bool diverged = false;
};

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = "system,tableau,h,N,seed,e_interp,e_extrap,e_H\n";
  for (const auto& r : rows)
    out += r.system + "," + r.tableau + "," + format_double(r.grid.h) + "," +
           std::to_string(r.grid.n) + "," + std::to_string(r.seed) + "," +
           format_double(r.report.e_interp) + "," + format_double(r.report.e_extrap) + "," +
           format_double(r.report.e_hamiltonian) + "\n";
  return out;
}

/// Evaluates every checkpoint and writes the combined results table.
/// Missing checkpoints are skipped with a warning unless `strict`; a
/// diverging rollout is recorded as an infinite error.
inline std::vector<ResultRow> cmd_evaluate(const ExperimentConfig& cfg,
                                           const CommandOptions& opt = {}) {
  for (const auto& w : cfg.validate()) *opt.log << "warning: " << w << "\n";
  const auto sys = cfg.hamiltonian();
  const RunPaths paths{cfg.output_dir};
  const auto runs = detail::run_matrix(cfg, opt);

  std::vector<Trajectory> truths;
  for (const auto& g : cfg.grid)
    truths.push_back(test_truth(sys, cfg.initial_value, g.h, g.n, cfg.extrapolation_ratio,
                                cfg.solver()));

  std::vector<std::optional<ResultRow>> rows(runs.size());
  std::mutex log_mutex;
  detail::run_pool(runs.size(), opt.jobs, [&](std::size_t i) {
    const auto& run = runs[i];
    const auto tag = paths.run_tag(cfg.system, run.tableau, run.grid, run.seed);
    if (!fs::exists(paths.checkpoint(tag))) {
      if (opt.strict) throw InvalidArgument("missing checkpoint " + paths.checkpoint(tag).string());
      std::lock_guard lock(log_mutex);
      *opt.log << "warning: missing checkpoint " << paths.checkpoint(tag).string()
               << ", row skipped\n";
      return;
    }
    std::size_t gi = 0;
    while (cfg.grid[gi].h != run.grid.h || cfg.grid[gi].n != run.grid.n) ++gi;
    const auto ckpt = checkpoint_from_json(read_json(paths.checkpoint(tag)));
    ResultRow row{cfg.system, run.tableau, run.grid, run.seed, {}, false};
    try {
      row.report = evaluate(ckpt.model, sys, truths[gi], cfg.solver());
    } catch (const Divergence& e) {
      if (opt.strict) throw;
      const double inf = std::numeric_limits<double>::infinity();
      row.report.e_interp = row.report.e_extrap = inf;
      row.report.e_hamiltonian = hamiltonian_error(ckpt.model, sys, truths[gi]);
      row.report.h_test = truths[gi].h;
      row.report.n_test = truths[gi].transitions();
      row.diverged = true;
      std::lock_guard lock(log_mutex);
      *opt.log << "warning: " << tag << ": " << e.what() << "\n";
    }
    Json ej = to_json(row.report);
    ej["diverged"] = row.diverged;
    write_json(paths.eval_report(tag), ej);
    rows[i] = std::move(row);
  });

  std::vector<ResultRow> out;
  for (auto& r : rows)
    if (r) out.push_back(std::move(*r));
  write_text(paths.results_csv(), results_csv(out));
  *opt.log << "wrote " << paths.results_csv().string() << " (" << out.size() << " rows)\n";
  return out;
}

/// Default one-step ladders: four points with ratio 2^(1/8) from h = 0.1,
/// starting at 0.12 for order 6 so the smallest error stays near 1e-10.
inline std::vector<double> default_local_ladder(int order) {
  const double h0 = order >= 6 ? 0.12 : 0.1;
  const double ratio = std::pow(2.0, 0.125);
  std::vector<double> hs;
  for (int i = 0; i < 4; ++i) hs.push_back(h0 / std::pow(ratio, i));
  return hs;
}

struct OrderRow {
  std::string tableau;
  int order = 0;
  long stages = 0;
  std::optional<double> forward;           // global error at a fixed horizon, expect p
  std::optional<double> injected_flow;     // one step vs exact flow, expect p + 1
  std::optional<double> injected_forward;  // one step vs solved forward step, expect p + 2
  std::vector<std::string> notes;

  bool forward_ok() const { return forward && *forward >= order - 0.3 && *forward <= order + 0.5; }
  bool injected_flow_ok() const {
    return injected_flow && *injected_flow >= order + 0.7 && *injected_flow <= order + 1.5;
  }
  bool injected_forward_ok() const { return injected_forward && *injected_forward >= order + 1.5; }
  bool is_mirk() const { return tableau != "rk4"; }
  bool pass() const {
    return forward_ok() && (!is_mirk() || (injected_flow_ok() && injected_forward_ok()));
  }
};

inline OrderRow verify_method_order(const std::string& name, const HamiltonianSystem& sys,
                                    const State& y0, const OrderPlan& plan,
                                    const SolverOptions& solver = {}) {
  OrderRow row;
  auto guard = [&row](const char* what, auto&& fn) -> std::optional<double> {
    try {
      return fn();
    } catch (const UnreliableFit&) {
      row.notes.push_back(std::string(what) + ": unreliable fit");
    } catch (const Error& e) {
      row.notes.push_back(std::string(what) + ": " + e.what());
    }
    return std::nullopt;
  };
  if (name == "rk4") {
    const auto tab = rk4();
    row.tableau = tab.name;
    row.order = tab.order;
    row.stages = tab.stages();
    row.forward = guard("forward", [&] {
      return fit_global_order(explicit_map(tab, sys), sys, y0, plan.forward_h, plan.horizon, solver)
          .slope;
    });
    return row;
  }
  const auto tab = training_method(name);
  row.tableau = tab.name;
  row.order = tab.order;
  row.stages = tab.stages();
  const auto local = plan.local_h.empty() ? default_local_ladder(tab.order) : plan.local_h;
  row.forward = guard("forward", [&] {
    return fit_global_order(forward_map(tab, sys), sys, y0, plan.forward_h, plan.horizon, solver)
        .slope;
  });
  row.injected_flow = guard("injected_flow", [&] {
    return estimate_order(injected_map(tab, sys), sys, y0, local, ErrorTarget::vs_exact_flow, {},
                          solver);
  });
  row.injected_forward = guard("injected_forward", [&] {
    return estimate_order(injected_map(tab, sys), sys, y0, local, ErrorTarget::vs_forward_step,
                          forward_map(tab, sys, 1e-15), solver);
  });
  return row;
}

inline std::string orders_csv(const std::vector<OrderRow>& rows) {
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string out =
      "tableau,order,stages,forward_slope,injected_flow_slope,injected_forward_slope,pass,notes\n";
  for (const auto& r : rows) {
    std::string notes;
    for (const auto& n : r.notes) notes += (notes.empty() ? "" : "; ") + n;
    out += r.tableau + "," + std::to_string(r.order) + "," + std::to_string(r.stages) + "," +
           cell(r.forward) + "," + cell(r.injected_flow) + "," + cell(r.injected_forward) + "," +
           (r.pass() ? "pass" : "fail") + ",\"" + notes + "\"\n";
  }
  return out;
}

/// Empirical order table for every configured method.
inline std::vector<OrderRow> cmd_orders(const ExperimentConfig& cfg, const CommandOptions& opt = {}) {
  for (const auto& w : cfg.validate()) *opt.log << "warning: " << w << "\n";
  const auto sys = cfg.hamiltonian();
  const OrderPlan plan = cfg.orders.value_or(OrderPlan{});
  std::vector<OrderRow> rows(cfg.tableaus.size());
  detail::run_pool(rows.size(), opt.jobs, [&](std::size_t i) {
    rows[i] = verify_method_order(cfg.tableaus[i], sys, cfg.initial_value, plan);
  });
  const RunPaths paths{cfg.output_dir};
  write_text(paths.orders_csv(), orders_csv(rows));
  *opt.log << "wrote " << paths.orders_csv().string() << "\n";
  return rows;
}

}  // namespace mirkhnn
