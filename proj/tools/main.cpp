// wellrl command-line driver: sample -> cluster -> train -> benchmark -> evaluate -> report.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "wellrl/config.hpp"
#include "wellrl/error.hpp"
#include "wellrl/orchestrator.hpp"

namespace {

struct Flags {
  std::string config;
  int case_id = 0;
  bool desk = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string algo = "ppo";
  std::optional<int> frozen;
  bool full_state = false;
  std::string output;
};

wellrl::RunConfig resolve(const Flags& f, const std::string& command) {
  using wellrl::ConfigError;
  wellrl::RunConfig cfg;
  if (!f.config.empty()) {
    cfg = wellrl::load_run_config(f.config);
    if (f.desk && !cfg.desk) throw ConfigError("--desk given but " + f.config + " is not a desk-scale config");
  } else if (f.case_id == 1 || f.case_id == 2) {
    cfg = wellrl::preset("case" + std::to_string(f.case_id) + (f.desk ? "-desk" : "-full"));
  } else {
    throw ConfigError("pass --config FILE or --case 1|2 (optionally with --desk)");
  }
  if (!f.output.empty()) cfg.output_dir = f.output;
  if (f.workers) {
    if (*f.workers < 1) throw ConfigError("--workers must be >= 1");
    cfg.workers = *f.workers;
    if (cfg.ppo) cfg.ppo->train.workers = cfg.workers;
    if (cfg.a2c) cfg.a2c->train.workers = cfg.workers;
    if (cfg.de) cfg.de->workers = cfg.workers;
  }
  if (f.seed) {
    if (command == "sample") cfg.scenarios.sample_seed = *f.seed;
    if (command == "cluster") cfg.scenarios.cluster_seed = *f.seed;
    if (command == "train" || command == "evaluate" || command == "report") cfg.train.seeds = {*f.seed};
    if (command == "benchmark" && cfg.de) cfg.de->seed = *f.seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Waterflood well control: sampling, clustering, RL training, DE baseline, reports"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Run config (JSON)");
  app.add_option("--case", f.case_id, "Use a built-in preset for case 1 or 2")->check(CLI::IsMember({1, 2}));
  app.add_flag("--desk", f.desk, "Desk-scale preset (31x31 grid, 64 samples, 8 clusters)");
  app.add_option("--seed", f.seed, "Override the seed used by this stage");
  app.add_option("--workers", f.workers, "Worker threads");
  app.add_option("--algo", f.algo, "ppo or a2c")->check(CLI::IsMember({"ppo", "a2c", "PPO", "A2C"}));
  app.add_option("--frozen", f.frozen, "Train on a single training realisation (index into the training vector)");
  app.add_flag("--full-state", f.full_state, "Observe every cell saturation");
  app.add_option("--output", f.output, "Override output_dir");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the resolved config instead of running");

  const char* names[] = {"sample", "cluster", "train", "benchmark", "evaluate", "report"};
  const char* help[] = {"Sample permeability realisations",  "Build the training and evaluation vectors",
                        "Train an RL policy (one run per seed)", "Differential-evolution reference per realisation",
                        "Evaluate base, trained and DE policies", "Write learning curves, tables and accounting"};
  for (int i = 0; i < 6; ++i) app.add_subcommand(names[i], help[i])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const wellrl::RunConfig cfg = resolve(f, command);
    if (print_config) {
      std::cout << wellrl::to_json(cfg).dump(2) << "\n";
      return 0;
    }
    wellrl::CommandOptions opts;
    opts.algo = wellrl::parse_algo(f.algo);
    opts.frozen = f.frozen;
    opts.full_state = f.full_state;
    opts.log = &std::cout;
    if (command == "sample") wellrl::cmd_sample(cfg, opts);
    if (command == "cluster") wellrl::cmd_cluster(cfg, opts);
    if (command == "train") wellrl::cmd_train(cfg, opts);
    if (command == "benchmark") wellrl::cmd_benchmark(cfg, opts);
    if (command == "evaluate") wellrl::cmd_evaluate(cfg, opts);
    if (command == "report") wellrl::cmd_report(cfg, opts);
  } catch (const wellrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const wellrl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
