#include "wellrl/orchestrator.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "wellrl/error.hpp"

namespace wellrl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ostream& say(const CommandOptions& o) {
  static std::ostream null(nullptr);
  return o.log ? *o.log : null;
}

fs::path root_of(const RunConfig& cfg) { return fs::path(cfg.output_dir); }

/// Stage bookkeeping stored in <output_dir>/run_manifest.json.
class Manifest {
 public:
  explicit Manifest(const RunConfig& cfg) : root_(root_of(cfg)), config_(to_json(cfg)) {
    const fs::path p = root_ / "run_manifest.json";
    if (fs::exists(p)) doc_ = json::parse(read_file(p));
    if (!doc_.contains("stages")) doc_["stages"] = json::object();
  }

  static std::string stamp(const std::string& stage, const json& inputs) {
    return git_blob_sha1(json{{"stage", stage}, {"inputs", inputs}}.dump());
  }

  bool fresh(const std::string& stage, const std::string& stamp) const {
    const auto& stages = doc_["stages"];
    if (!stages.contains(stage)) return false;
    const auto& e = stages[stage];
    if (e.value("stamp", "") != stamp) return false;
    for (const auto& [rel, sha] : e["outputs"].items()) {
      const fs::path p = root_ / rel;
      if (!fs::exists(p) || file_sha1(p) != sha.get<std::string>()) return false;
    }
    return true;
  }

  void commit(const std::string& stage, const std::string& stamp, const json& inputs,
              const std::vector<fs::path>& outputs, double seconds, std::int64_t simulations,
              std::int64_t monitoring = 0) {
    json out = json::object();
    for (const auto& p : outputs) out[fs::relative(p, root_).generic_string()] = file_sha1(p);
    doc_["stages"][stage] = {{"stamp", stamp},
                             {"inputs", inputs},
                             {"outputs", out},
                             {"seconds", seconds},
                             {"simulations", simulations},
                             {"monitoring_simulations", monitoring}};
    std::int64_t total = 0;
    for (const auto& [k, v] : doc_["stages"].items()) total += v.value("simulations", std::int64_t{0});
    doc_["config"] = config_;
    doc_["simulation_counter"] = total;
    write_file(root_ / "run_manifest.json", doc_.dump(2) + "\n");
  }

  const json& stages() const { return doc_["stages"]; }

 private:
  fs::path root_;
  json config_;
  json doc_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json problem_inputs(const RunConfig& cfg) {
  const json j = to_json(cfg);
  return {{"grid", j["grid"]}, {"wells", j["wells"]}, {"physics", j["physics"]}};
}

fs::path samples_index(const RunConfig& cfg) { return root_of(cfg) / "scenarios" / "samples.json"; }
fs::path scenario_file(const RunConfig& cfg) { return root_of(cfg) / "cluster" / "scenario_set.json"; }

void require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + " not found at " + p.string() + "; run the earlier stage first");
}

std::shared_ptr<const ReservoirProblem> shared_problem(const RunConfig& cfg) {
  return std::make_shared<const ReservoirProblem>(make_problem(cfg));
}

std::vector<PermField> pick(const std::vector<PermField>& all, const std::vector<int>& ids) {
  std::vector<PermField> out;
  for (int i : ids) out.push_back(all.at(static_cast<std::size_t>(i)));
  return out;
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::string s;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + num(m(i, j));
    s += "\n";
  }
  return s;
}

}  // namespace

std::string file_sha1(const fs::path& path) { return git_blob_sha1(read_file(path)); }

std::string variant_name(Algo algo, bool full_state, std::optional<int> frozen) {
  std::string n = to_string(algo);
  if (full_state) n += "-full";
  if (frozen) n += "-frozen" + std::to_string(*frozen);
  return n;
}

// ---------------------------------------------------------------- sample

StageOutcome cmd_sample(const RunConfig& cfg, const CommandOptions& opts) {
  const json j = to_json(cfg);
  const json inputs = {{"grid", j["grid"]},
                       {"wells", j["wells"]},
                       {"distribution", j["distribution"]},
                       {"samples", cfg.scenarios.samples},
                       {"sample_seed", cfg.scenarios.sample_seed}};
  const std::string stamp = Manifest::stamp("sample", inputs);
  Manifest man(cfg);
  if (man.fresh("sample", stamp)) {
    say(opts) << "sample: up to date\n";
    return {"sample", true, 0};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ReservoirProblem problem = make_problem(cfg);
  const int n = cfg.scenarios.samples;
  std::vector<PermField> fields;
  if (cfg.distribution.kind == "gaussian") {
    std::vector<int> cond;
    for (int w = 0; w < problem.wells.well_count(); ++w) cond.push_back(problem.wells.cell_of(w));
    ConditionalGaussianSampler sampler(problem.grid, cond, cfg.distribution.gaussian);
    for (int i = 0; i < n; ++i) {
      Rng rng = make_rng(cfg.scenarios.sample_seed, {static_cast<std::uint64_t>(i)});
      fields.push_back(sampler.sample(rng));
    }
  } else {
    for (int i = 0; i < n; ++i) {
      Rng rng = make_rng(cfg.scenarios.sample_seed, {static_cast<std::uint64_t>(i)});
      fields.push_back(sample_channel(rng, problem.grid, cfg.distribution.channel));
    }
  }
  const fs::path dir = root_of(cfg) / "scenarios";
  fs::create_directories(dir / "fields");
  std::vector<fs::path> outputs;
  json files = json::array();
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04d.csv", i);
    const fs::path p = dir / "fields" / name;
    write_field_csv(p, fields[static_cast<std::size_t>(i)]);
    outputs.push_back(p);
    files.push_back({{"id", i}, {"file", std::string("fields/") + name}, {"sha1", file_sha1(p)}, {"stream", i}});
  }
  const json index = {{"count", n},
                      {"seed", cfg.scenarios.sample_seed},
                      {"distribution", j["distribution"]},
                      {"grid", j["grid"]},
                      {"samples", files}};
  write_file(samples_index(cfg), index.dump(2) + "\n");
  outputs.push_back(samples_index(cfg));
  man.commit("sample", stamp, inputs, outputs, seconds_since(t0), 0);
  say(opts) << "sample: wrote " << n << " fields to " << dir.string() << "\n";
  return {"sample", false, 0};
}

std::vector<PermField> load_samples(const RunConfig& cfg) {
  require(samples_index(cfg), "scenario archive");
  const json index = json::parse(read_file(samples_index(cfg)));
  const Grid grid(cfg.grid.nx, cfg.grid.ny, cfg.grid.lx, cfg.grid.ly, cfg.grid.porosity);
  std::vector<PermField> out;
  for (const auto& s : index["samples"]) out.push_back(read_field_csv(samples_index(cfg).parent_path() / s["file"].get<std::string>(), grid));
  return out;
}

// ---------------------------------------------------------------- cluster

StageOutcome cmd_cluster(const RunConfig& cfg, const CommandOptions& opts) {
  require(samples_index(cfg), "scenario archive");
  const json j = to_json(cfg);
  json inputs = problem_inputs(cfg);
  inputs["scenarios"] = j["scenarios"];
  inputs["samples_sha1"] = file_sha1(samples_index(cfg));
  const std::string stamp = Manifest::stamp("cluster", inputs);
  Manifest man(cfg);
  if (man.fresh("cluster", stamp)) {
    say(opts) << "cluster: up to date\n";
    return {"cluster", true, 0};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<PermField> samples = load_samples(cfg);
  const auto problem = shared_problem(cfg);
  const ScenarioSet set = build_scenario_set(problem, samples, cfg.scenarios.clusters, cfg.scenarios.probe,
                                             cfg.scenarios.cluster_seed, cfg.workers);
  for (const auto& w : set.warnings) say(opts) << "cluster: warning: " << w << "\n";
  const fs::path dir = root_of(cfg) / "cluster";
  write_file(dir / "dist.csv", matrix_csv(set.dist));
  write_file(dir / "coords.csv", matrix_csv(set.coords));
  json centers = json::array();
  for (Eigen::Index k = 0; k < set.centers.rows(); ++k) centers.push_back({set.centers(k, 0), set.centers(k, 1)});
  const json doc = {{"labels", set.labels},       {"training", set.training}, {"evaluation", set.evaluation},
                    {"centers", centers},         {"inertia", set.inertia},   {"warnings", set.warnings},
                    {"seed", cfg.scenarios.cluster_seed}};
  write_file(scenario_file(cfg), doc.dump(2) + "\n");
  const auto sims = static_cast<std::int64_t>(samples.size());
  man.commit("cluster", stamp, inputs, {dir / "dist.csv", dir / "coords.csv", scenario_file(cfg)}, seconds_since(t0), sims);
  say(opts) << "cluster: " << set.training.size() << " training and " << set.evaluation.size()
            << " evaluation realisations\n";
  return {"cluster", false, sims};
}

ScenarioArchive load_archive(const RunConfig& cfg) {
  require(scenario_file(cfg), "scenario set");
  ScenarioArchive a;
  a.samples = load_samples(cfg);
  const json doc = json::parse(read_file(scenario_file(cfg)));
  a.labels = doc["labels"].get<std::vector<int>>();
  a.training = doc["training"].get<std::vector<int>>();
  a.evaluation = doc["evaluation"].get<std::vector<int>>();
  return a;
}

// ---------------------------------------------------------------- train

namespace {

std::string log_csv(const std::vector<IterationRecord>& log) {
  std::string s = "iteration,episodes,R_train,R_eval,policy_loss,value_loss,entropy,wall_time\n";
  for (const auto& r : log) {
    s += std::to_string(r.iteration) + "," + std::to_string(r.episodes) + "," +
         (r.evaluated ? num(r.train_return) : "") + "," + (r.evaluated ? num(r.eval_return) : "") + "," +
         num(r.policy_loss) + "," + num(r.value_loss) + "," + num(r.entropy) + "," + num(r.wall_time) + "\n";
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct Variant {
  Algo algo;
  bool full_state;
  std::optional<int> frozen;
  std::string name;
};

Variant variant_of(const CommandOptions& o) { return {o.algo, o.full_state, o.frozen, variant_name(o.algo, o.full_state, o.frozen)}; }

EnvConfig env_config_for(const RunConfig& cfg, bool full_state) {
  EnvConfig e;
  e.base_first_action = cfg.train.base_first_action;
  e.full_state = full_state;
  return e;
}

TrainConfig train_config_for(const RunConfig& cfg, const Variant& v, const ReservoirProblem& problem,
                             std::uint64_t seed) {
  const AlgoSection& sec = cfg.algo(v.algo);
  TrainConfig t = sec.train;
  const ActionCodec codec(problem.wells);
  const int obs_dim = v.full_state ? problem.grid.cell_count()
                                   : 2 * problem.wells.producer_count() + problem.wells.injector_count();
  std::vector<int> hidden = sec.hidden;
  if (v.full_state) {
    if (!cfg.full_state) throw ConfigError("--full-state needs a 'full_state' config section");
    hidden = cfg.full_state->hidden;
    t.learning_rate = cfg.full_state->learning_rate;
  }
  t.layer_sizes = {obs_dim};
  t.layer_sizes.insert(t.layer_sizes.end(), hidden.begin(), hidden.end());
  t.layer_sizes.push_back(codec.action_dim());
  t.seed = seed;
  t.workers = cfg.workers;
  t.eval_every = cfg.train.eval_every;
  return t;
}

fs::path variant_dir(const RunConfig& cfg, const std::string& name) { return root_of(cfg) / "train" / name; }

fs::path seed_dir(const RunConfig& cfg, const std::string& name, std::uint64_t seed) {
  return variant_dir(cfg, name) / ("seed_" + std::to_string(seed));
}

}  // namespace

std::vector<LogRow> read_training_log(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<LogRow> rows;
  auto d = [](const std::string& s) { return s.empty() ? std::nan("") : std::stod(s); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() < 8) throw std::runtime_error("malformed training log " + path.string());
    rows.push_back({std::stoi(c[0]), std::stoll(c[1]), d(c[2]), d(c[3]), d(c[4]), d(c[5]), d(c[6]), d(c[7])});
  }
  return rows;
}

std::vector<StageOutcome> cmd_train(const RunConfig& cfg, const CommandOptions& opts) {
  require(scenario_file(cfg), "scenario set");
  const Variant v = variant_of(opts);
  const ScenarioArchive archive = load_archive(cfg);
  const auto problem = shared_problem(cfg);
  std::vector<int> train_ids = archive.training;
  if (v.frozen) {
    if (*v.frozen < 0 || *v.frozen >= static_cast<int>(train_ids.size()))
      throw ConfigError("--frozen index " + std::to_string(*v.frozen) + " is outside the training vector (size " +
                        std::to_string(train_ids.size()) + ")");
    train_ids = {train_ids[static_cast<std::size_t>(*v.frozen)]};
  }
  const ScenarioPool train_pool = make_pool(*problem, pick(archive.samples, train_ids));
  const ScenarioPool eval_pool = make_pool(*problem, pick(archive.samples, archive.evaluation));
  const EnvConfig env_cfg = env_config_for(cfg, v.full_state);
  const json j = to_json(cfg);

  std::vector<StageOutcome> outcomes;
  std::vector<fs::path> logs;
  for (std::uint64_t seed : cfg.train.seeds) {
    const TrainConfig tc = train_config_for(cfg, v, *problem, seed);
    const std::string stage = "train/" + v.name + "/seed_" + std::to_string(seed);
    json inputs = problem_inputs(cfg);
    inputs["algo"] = j[to_string(v.algo)];
    inputs["layer_sizes"] = tc.layer_sizes;
    inputs["learning_rate"] = tc.learning_rate;
    inputs["train"] = j["train"];
    inputs["seed"] = seed;
    inputs["training_ids"] = train_ids;
    inputs["evaluation_ids"] = archive.evaluation;
    inputs["scenario_set_sha1"] = file_sha1(scenario_file(cfg));
    inputs["samples_sha1"] = file_sha1(samples_index(cfg));
    inputs["full_state"] = v.full_state;
    const std::string stamp = Manifest::stamp(stage, inputs);
    const fs::path dir = seed_dir(cfg, v.name, seed);
    logs.push_back(dir / "log.csv");
    Manifest man(cfg);
    if (man.fresh(stage, stamp)) {
      say(opts) << stage << ": up to date\n";
      outcomes.push_back({stage, true, 0});
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    if (fs::exists(dir)) fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<fs::path> outputs;
    TrainingSetup setup = make_well_setup(problem, train_pool, eval_pool, env_cfg, seed, cfg.workers);
    std::int64_t monitoring = 0;
    setup.on_iteration = [&](const IterationRecord& r, const ActorCritic& net) {
      if (r.evaluated) monitoring += static_cast<std::int64_t>(train_pool.size() + eval_pool.size());
      if (cfg.train.checkpoint_every > 0 && r.iteration % cfg.train.checkpoint_every == 0) {
        char name[40];
        std::snprintf(name, sizeof name, "iter_%05d.ckpt", r.iteration);
        const fs::path p = dir / "checkpoints" / name;
        fs::create_directories(p.parent_path());
        save_checkpoint(p, net, {r.episodes, seed, v.name});
        outputs.push_back(p);
      }
      if (r.evaluated && (r.iteration % 10 == 0))
        say(opts) << stage << ": iteration " << r.iteration << " episodes " << r.episodes << " R_train "
                  << r.train_return << " R_eval " << r.eval_return << "\n";
    };
    TrainResult res = train(tc, setup);
    save_checkpoint(dir / "final.ckpt", res.net, {res.episodes, seed, v.name});
    write_file(dir / "log.csv", log_csv(res.log));
    outputs.push_back(dir / "final.ckpt");
    outputs.push_back(dir / "log.csv");
    const std::int64_t sims = res.env_steps / problem->control_steps;
    man.commit(stage, stamp, inputs, outputs, seconds_since(t0), sims, monitoring);
    say(opts) << stage << ": done, " << res.episodes << " episodes\n";
    outcomes.push_back({stage, false, sims});
  }

  // Mean across seeds, aligned by iteration.
  const std::string stage = "summary/" + v.name;
  json inputs = json::array();
  for (const auto& p : logs) inputs.push_back(file_sha1(p));
  const std::string stamp = Manifest::stamp(stage, inputs);
  Manifest man(cfg);
  if (man.fresh(stage, stamp)) {
    outcomes.push_back({stage, true, 0});
    return outcomes;
  }
  std::vector<std::vector<LogRow>> all;
  for (const auto& p : logs) all.push_back(read_training_log(p));
  std::size_t len = all.front().size();
  for (const auto& a : all) len = std::min(len, a.size());
  std::string s = "iteration,episodes,R_train,R_eval,seeds\n";
  for (std::size_t i = 0; i < len; ++i) {
    double tr = 0.0, ev = 0.0;
    for (const auto& a : all) {
      tr += a[i].train_return;
      ev += a[i].eval_return;
    }
    const double n = static_cast<double>(all.size());
    s += std::to_string(all.front()[i].iteration) + "," + std::to_string(all.front()[i].episodes) + "," + num(tr / n) +
         "," + num(ev / n) + "," + std::to_string(all.size()) + "\n";
  }
  const fs::path out = variant_dir(cfg, v.name) / "summary.csv";
  write_file(out, s);
  man.commit(stage, stamp, inputs, {out}, 0.0, 0);
  outcomes.push_back({stage, false, 0});
  return outcomes;
}

// ---------------------------------------------------------------- benchmark

StageOutcome cmd_benchmark(const RunConfig& cfg, const CommandOptions& opts) {
  require(scenario_file(cfg), "scenario set");
  if (!cfg.de) throw ConfigError("config has no 'de' section");
  const json j = to_json(cfg);
  json inputs = problem_inputs(cfg);
  inputs["de"] = j["de"];
  inputs["scenario_set_sha1"] = file_sha1(scenario_file(cfg));
  inputs["samples_sha1"] = file_sha1(samples_index(cfg));
  const std::string stamp = Manifest::stamp("benchmark", inputs);
  Manifest man(cfg);
  if (man.fresh("benchmark", stamp)) {
    say(opts) << "benchmark: up to date\n";
    return {"benchmark", true, 0};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioArchive archive = load_archive(cfg);
  const auto problem = shared_problem(cfg);
  const ScenarioPool pool = make_pool(*problem, pick(archive.samples, archive.evaluation));
  const DeBenchmark b = de_benchmark(problem, pool, *cfg.de);
  const fs::path dir = root_of(cfg) / "benchmark";
  std::vector<fs::path> outputs;
  json runs = json::array();
  for (std::size_t k = 0; k < b.runs.size(); ++k) {
    std::string h = "generation,best_fitness\n";
    for (std::size_t g = 0; g < b.runs[k].history.size(); ++g) h += std::to_string(g + 1) + "," + num(b.runs[k].history[g]) + "\n";
    const fs::path hp = dir / ("history_" + std::to_string(k) + ".csv");
    write_file(hp, h);
    outputs.push_back(hp);
    runs.push_back({{"eval_index", k},
                    {"sample_id", archive.evaluation[k]},
                    {"best_return", b.best_returns[k]},
                    {"base_return", b.base_returns[k]},
                    {"best_sequence", b.runs[k].best},
                    {"evaluations", b.runs[k].evaluations}});
  }
  const json summary = {{"mean", b.mean}, {"evaluations", b.evaluations}, {"runs", runs}};
  write_file(dir / "de_summary.json", summary.dump(2) + "\n");
  outputs.push_back(dir / "de_summary.json");
  man.commit("benchmark", stamp, inputs, outputs, seconds_since(t0), b.evaluations,
             static_cast<std::int64_t>(pool.size()));
  say(opts) << "benchmark: mean DE return " << b.mean << " over " << b.runs.size() << " realisations\n";
  return {"benchmark", false, b.evaluations};
}

// ---------------------------------------------------------------- evaluate

namespace {

struct TrainedVariant {
  std::string name;
  bool full_state = false;
  std::vector<fs::path> checkpoints;  // one per seed, seed order
};

std::vector<TrainedVariant> trained_variants(const RunConfig& cfg) {
  std::vector<TrainedVariant> out;
  const fs::path dir = root_of(cfg) / "train";
  if (!fs::exists(dir)) return out;
  std::vector<fs::path> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) names.push_back(e.path());
  std::sort(names.begin(), names.end());
  for (const auto& p : names) {
    TrainedVariant v;
    v.name = p.filename().string();
    v.full_state = v.name.find("-full") != std::string::npos;
    for (std::uint64_t seed : cfg.train.seeds) {
      const fs::path c = p / ("seed_" + std::to_string(seed)) / "final.ckpt";
      if (fs::exists(c)) v.checkpoints.push_back(c);
    }
    if (!v.checkpoints.empty()) out.push_back(std::move(v));
  }
  return out;
}

Policy sequence_policy(std::vector<double> seq, int action_dim) {
  auto step = std::make_shared<int>(0);
  return [seq = std::move(seq), action_dim, step](std::span<const double>) {
    const auto off = static_cast<std::size_t>(*step) * static_cast<std::size_t>(action_dim);
    ++*step;
    return std::vector<double>(seq.begin() + static_cast<std::ptrdiff_t>(off),
                               seq.begin() + static_cast<std::ptrdiff_t>(off + action_dim));
  };
}

void append_controls(std::string& s, int eval_index, const std::string& policy, const EpisodeTrace& trace,
                     const WellSet& wells) {
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    for (std::size_t w = 0; w < trace.steps[k].rates.size(); ++w) {
      const bool prod = static_cast<int>(w) < wells.producer_count();
      const int idx = prod ? static_cast<int>(w) : static_cast<int>(w) - wells.producer_count();
      s += std::to_string(eval_index) + "," + policy + "," + std::to_string(k + 1) + "," + (prod ? "P" : "I") +
           std::to_string(idx) + "," + num(trace.steps[k].rates[w]) + "\n";
    }
  }
}

}  // namespace

StageOutcome cmd_evaluate(const RunConfig& cfg, const CommandOptions& opts) {
  require(scenario_file(cfg), "scenario set");
  const auto variants = trained_variants(cfg);
  const fs::path de_file = root_of(cfg) / "benchmark" / "de_summary.json";
  json inputs = problem_inputs(cfg);
  inputs["train"] = to_json(cfg)["train"];
  inputs["scenario_set_sha1"] = file_sha1(scenario_file(cfg));
  inputs["samples_sha1"] = file_sha1(samples_index(cfg));
  json ck = json::object();
  for (const auto& v : variants)
    for (const auto& c : v.checkpoints) ck[fs::relative(c, root_of(cfg)).generic_string()] = file_sha1(c);
  inputs["checkpoints"] = ck;
  inputs["de_sha1"] = fs::exists(de_file) ? file_sha1(de_file) : "";
  const std::string stamp = Manifest::stamp("evaluate", inputs);
  Manifest man(cfg);
  if (man.fresh("evaluate", stamp)) {
    say(opts) << "evaluate: up to date\n";
    return {"evaluate", true, 0};
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioArchive archive = load_archive(cfg);
  const auto problem = shared_problem(cfg);
  const ScenarioPool pool = make_pool(*problem, pick(archive.samples, archive.evaluation));
  const int act_dim = ActionCodec(problem->wells).action_dim();
  std::int64_t sims = 0;

  std::vector<std::string> columns{"base"};
  std::vector<std::vector<double>> values;  // per column, per realisation
  std::string controls = "eval_index,policy,step,well,rate\n";
  std::vector<EpisodeTrace> base_traces;
  std::vector<double> base;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    base_traces.push_back(run_episode(base_policy(act_dim), problem, pool[k], EnvConfig{}));
    base.push_back(base_traces.back().total_return);
  }
  sims += static_cast<std::int64_t>(pool.size());
  values.push_back(base);
  std::map<std::string, std::vector<EpisodeTrace>> traces;
  traces["base"] = base_traces;
  std::vector<std::string> order{"base"};

  for (const auto& v : variants) {
    const EnvConfig env_cfg = env_config_for(cfg, v.full_state);
    std::vector<double> mean(pool.size(), 0.0);
    for (std::size_t s = 0; s < v.checkpoints.size(); ++s) {
      auto net = std::make_shared<const ActorCritic>(load_checkpoint(v.checkpoints[s]).net);
      const Policy policy = mean_policy(net);
      for (std::size_t k = 0; k < pool.size(); ++k) {
        EpisodeTrace t = run_episode(policy, problem, pool[k], env_cfg);
        mean[k] += t.total_return;
        if (s == 0) traces[v.name].push_back(std::move(t));
      }
      sims += static_cast<std::int64_t>(pool.size());
    }
    for (double& m : mean) m /= static_cast<double>(v.checkpoints.size());
    columns.push_back(v.name);
    values.push_back(mean);
    order.push_back(v.name);
  }
  if (fs::exists(de_file)) {
    const json de = json::parse(read_file(de_file));
    std::vector<double> best;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const auto seq = de["runs"].at(k)["best_sequence"].get<std::vector<double>>();
      EpisodeTrace t = run_episode(sequence_policy(seq, act_dim), problem, pool[k], EnvConfig{});
      best.push_back(t.total_return);
      traces["de"].push_back(std::move(t));
    }
    sims += static_cast<std::int64_t>(pool.size());
    columns.push_back("de");
    values.push_back(best);
    order.push_back("de");
  }

  std::string returns = "eval_index,sample_id";
  for (const auto& c : columns) returns += "," + c;
  returns += "\n";
  for (std::size_t k = 0; k < pool.size(); ++k) {
    returns += std::to_string(k) + "," + std::to_string(archive.evaluation[k]);
    for (const auto& col : values) returns += "," + num(col[k]);
    returns += "\n";
  }
  for (std::size_t k = 0; k < pool.size(); ++k)
    for (const auto& name : order) append_controls(controls, static_cast<int>(k), name, traces[name][k], problem->wells);

  const fs::path dir = root_of(cfg) / "evaluate";
  write_file(dir / "returns.csv", returns);
  write_file(dir / "controls.csv", controls);
  man.commit("evaluate", stamp, inputs, {dir / "returns.csv", dir / "controls.csv"}, seconds_since(t0), 0, sims);
  say(opts) << "evaluate: " << columns.size() << " policies on " << pool.size() << " realisations\n";
  return {"evaluate", false, 0};
}

// ---------------------------------------------------------------- report

std::vector<AccountingRow> accounting_table(const RunConfig& cfg) {
  std::vector<AccountingRow> rows;
  const auto seeds = static_cast<std::int64_t>(cfg.train.seeds.size());
  for (Algo a : {Algo::kPPO, Algo::kA2C}) {
    const auto& sec = a == Algo::kPPO ? cfg.ppo : cfg.a2c;
    if (!sec) continue;
    AccountingRow r;
    r.algorithm = to_string(a);
    r.formula = std::to_string(sec->train.total_episodes) + " episodes x " + std::to_string(seeds) + " seeds";
    r.expected = sec->train.total_episodes * seeds;
    rows.push_back(r);
  }
  if (cfg.de) {
    AccountingRow r;
    r.algorithm = "de";
    const std::int64_t l = cfg.scenarios.clusters;
    r.formula = std::to_string(cfg.de->iterations) + " generations x " + std::to_string(cfg.de->population) +
                " population x " + std::to_string(l) + " realisations";
    r.expected = static_cast<std::int64_t>(cfg.de->iterations) * cfg.de->population * l;
    if (!cfg.desk && cfg.case_id == "1") {
      r.note = "reference total 2058750 = 750 x 305 x 9 assumes population 305 and 9 realisations; "
               "population 310 with 16 clusters gives " + std::to_string(r.expected);
    } else if (!cfg.desk && cfg.case_id == "2") {
      r.note = "reference total 135000 = 750 x 20 x 9 assumes 9 realisations; 16 clusters give " +
               std::to_string(r.expected);
    }
    rows.push_back(r);
  }
  return rows;
}

StageOutcome cmd_report(const RunConfig& cfg, const CommandOptions& opts) {
  std::vector<std::string> gaps;
  if (fs::exists(scenario_file(cfg))) {
    cmd_evaluate(cfg, opts);
  } else {
    gaps.push_back("no scenario set: recovery and control tables omitted");
  }
  const fs::path root = root_of(cfg);
  const fs::path dir = root / "report";

  // Learning curves: mean across seeds per variant, plus flat base and DE reference lines.
  std::string curves = "series,iteration,episodes,R_train,R_eval\n";
  std::int64_t max_episodes = 0;
  const fs::path train_dir = root / "train";
  std::vector<fs::path> variants;
  if (fs::exists(train_dir))
    for (const auto& e : fs::directory_iterator(train_dir))
      if (fs::exists(e.path() / "summary.csv")) variants.push_back(e.path());
  std::sort(variants.begin(), variants.end());
  if (variants.empty()) gaps.push_back("no training summaries: learning curves contain reference lines only");
  for (const auto& v : variants) {
    std::istringstream in(read_file(v / "summary.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto c = split(line);
      max_episodes = std::max<std::int64_t>(max_episodes, std::stoll(c[1]));
      curves += v.filename().string() + "," + c[0] + "," + c[1] + "," + c[2] + "," + c[3] + "\n";
    }
  }

  std::string recovery;
  std::map<std::string, double> column_means;
  const fs::path returns = root / "evaluate" / "returns.csv";
  if (fs::exists(returns)) {
    std::istringstream in(read_file(returns));
    std::string line;
    std::getline(in, line);
    const auto header = split(line);
    recovery = line + "\n";
    std::vector<double> sums(header.size(), 0.0);
    int rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      recovery += line + "\n";
      const auto c = split(line);
      for (std::size_t i = 2; i < c.size(); ++i) sums[i] += std::stod(c[i]);
      ++rows;
    }
    recovery += "mean,";
    for (std::size_t i = 2; i < header.size(); ++i) {
      const double m = rows ? sums[i] / rows : 0.0;
      recovery += "," + num(m);
      column_means[header[i]] = m;
    }
    recovery += "\n";
    write_file(dir / "recovery.csv", recovery);
    const std::string controls = read_file(root / "evaluate" / "controls.csv");
    write_file(dir / "controls.csv", controls);
  }
  for (const char* ref : {"base", "de"}) {
    if (!column_means.count(ref)) {
      if (std::string(ref) == "de") gaps.push_back("no DE benchmark: reference line and column omitted");
      continue;
    }
    for (std::int64_t e : {std::int64_t{0}, max_episodes})
      curves += std::string(ref) + ",," + std::to_string(e) + ",," + num(column_means[ref]) + "\n";
  }
  write_file(dir / "learning_curves.csv", curves);

  // Accounting: formulas from config, counters from the manifest.
  Manifest man(cfg);
  std::map<std::string, std::int64_t> counted;
  for (const auto& [stage, e] : man.stages().items()) {
    const auto sims = e.value("simulations", std::int64_t{0});
    if (stage.rfind("train/", 0) == 0) {
      const std::string variant = stage.substr(6, stage.find('/', 6) - 6);
      counted[variant] += sims;
    } else if (stage == "benchmark") {
      counted["de"] += sims;
    }
  }
  std::string acc = "algorithm,formula,expected,counted,note\n";
  for (auto r : accounting_table(cfg)) {
    if (counted.count(r.algorithm)) r.counted = counted[r.algorithm];
    acc += r.algorithm + "," + r.formula + "," + std::to_string(r.expected) + "," +
           (r.counted ? std::to_string(*r.counted) : "") + ",\"" + r.note + "\"\n";
    counted.erase(r.algorithm);
  }
  for (const auto& [name, n] : counted)
    acc += name + ",extra variant,," + std::to_string(n) + ",\"\"\n";
  write_file(dir / "accounting.csv", acc);

  std::string g;
  for (const auto& x : gaps) g += x + "\n";
  write_file(dir / "gaps.txt", g);
  for (const auto& x : gaps) say(opts) << "report: gap: " << x << "\n";
  say(opts) << "report: written to " << dir.string() << "\n";
  return {"report", false, 0};
}

}  // namespace wellrl
