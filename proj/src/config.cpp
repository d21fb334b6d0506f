#include "wellrl/config.hpp"

#include <fstream>
#include <sstream>

#include "wellrl/error.hpp"

namespace wellrl {

using nlohmann::json;

const AlgoSection& RunConfig::algo(Algo a) const {
  const auto& section = a == Algo::kPPO ? ppo : a2c;
  if (!section) throw ConfigError("config has no '" + to_string(a) + "' section");
  return *section;
}

namespace {

struct Issues {
  std::vector<std::string> missing;
  std::vector<std::string> invalid;
};

// Reads required key `key` of `sec` into `out`, recording problems instead of throwing.
template <class T>
void req(const json& sec, const std::string& prefix, const char* key, T& out, Issues& is) {
  const std::string path = prefix.empty() ? key : prefix + "." + key;
  if (!sec.is_object() || !sec.contains(key)) {
    is.missing.push_back(path);
    return;
  }
  try {
    out = sec.at(key).get<T>();
  } catch (const json::exception&) {
    is.invalid.push_back(path + " has the wrong type");
  }
}

template <class T>
void opt(const json& sec, const std::string& prefix, const char* key, T& out, Issues& is) {
  if (sec.is_object() && sec.contains(key)) req(sec, prefix, key, out, is);
}

const json& section(const json& doc, const char* key, Issues& is) {
  static const json kNull;
  if (!doc.contains(key)) {
    is.missing.push_back(key);
    return kNull;
  }
  if (!doc.at(key).is_object()) {
    is.invalid.push_back(std::string(key) + " must be an object");
    return kNull;
  }
  return doc.at(key);
}

AlgoSection read_algo(const json& sec, const std::string& name, Algo algo, Issues& is) {
  AlgoSection a;
  a.train = default_train_config(algo);
  TrainConfig& t = a.train;
  req(sec, name, "actors", t.actors, is);
  req(sec, name, "steps", t.steps, is);
  if (algo == Algo::kPPO) {
    req(sec, name, "minibatch", t.minibatch, is);
    req(sec, name, "epochs", t.epochs, is);
    req(sec, name, "clip_range", t.clip_range, is);
  }
  req(sec, name, "gamma", t.gamma, is);
  req(sec, name, "gae_lambda", t.gae_lambda, is);
  req(sec, name, "value_coef", t.value_coef, is);
  req(sec, name, "entropy_coef", t.entropy_coef, is);
  req(sec, name, "learning_rate", t.learning_rate, is);
  req(sec, name, "max_grad_norm", t.max_grad_norm, is);
  req(sec, name, "total_episodes", t.total_episodes, is);
  req(sec, name, "hidden", a.hidden, is);
  opt(sec, name, "normalize_advantage", t.normalize_advantage, is);
  opt(sec, name, "log_std_init", t.log_std_init, is);
  return a;
}

json algo_json(const AlgoSection& a) {
  const TrainConfig& t = a.train;
  json j = {{"actors", t.actors},
            {"steps", t.steps},
            {"gamma", t.gamma},
            {"gae_lambda", t.gae_lambda},
            {"value_coef", t.value_coef},
            {"entropy_coef", t.entropy_coef},
            {"learning_rate", t.learning_rate},
            {"max_grad_norm", t.max_grad_norm},
            {"total_episodes", t.total_episodes},
            {"hidden", a.hidden},
            {"normalize_advantage", t.normalize_advantage},
            {"log_std_init", t.log_std_init}};
  if (t.algo == Algo::kPPO) {
    j["minibatch"] = t.minibatch;
    j["epochs"] = t.epochs;
    j["clip_range"] = t.clip_range;
  }
  return j;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  Issues is;
  RunConfig c;
  req(doc, "", "schema_version", c.schema_version, is);
  req(doc, "", "case", c.case_id, is);
  req(doc, "", "desk", c.desk, is);
  req(doc, "", "output_dir", c.output_dir, is);
  req(doc, "", "workers", c.workers, is);

  const json& g = section(doc, "grid", is);
  req(g, "grid", "nx", c.grid.nx, is);
  req(g, "grid", "ny", c.grid.ny, is);
  req(g, "grid", "lx", c.grid.lx, is);
  req(g, "grid", "ly", c.grid.ly, is);
  req(g, "grid", "porosity", c.grid.porosity, is);

  const json& w = section(doc, "wells", is);
  req(w, "wells", "pattern", c.wells.pattern, is);
  req(w, "wells", "total_rate", c.wells.total_rate, is);
  if (c.wells.pattern == "line_drive") req(w, "wells", "row_stride", c.wells.row_stride, is);

  const json& p = section(doc, "physics", is);
  req(p, "physics", "viscosity", c.physics.viscosity, is);
  req(p, "physics", "total_time", c.physics.total_time, is);
  req(p, "physics", "control_steps", c.physics.control_steps, is);
  req(p, "physics", "substeps", c.physics.substeps, is);

  const json& d = section(doc, "distribution", is);
  req(d, "distribution", "kind", c.distribution.kind, is);
  if (c.distribution.kind == "gaussian") {
    req(d, "distribution", "mean", c.distribution.gaussian.mean, is);
    req(d, "distribution", "sigma", c.distribution.gaussian.sigma, is);
    req(d, "distribution", "corr_len", c.distribution.gaussian.corr_len, is);
  } else if (c.distribution.kind == "channel") {
    req(d, "distribution", "width_min", c.distribution.channel.width_min, is);
    req(d, "distribution", "width_max", c.distribution.channel.width_max, is);
    req(d, "distribution", "g_high", c.distribution.channel.g_high, is);
    req(d, "distribution", "g_low", c.distribution.channel.g_low, is);
  } else if (d.is_object() && d.contains("kind")) {
    is.invalid.push_back("distribution.kind must be 'gaussian' or 'channel'");
  }

  const json& s = section(doc, "scenarios", is);
  std::string probes = "all";
  req(s, "scenarios", "samples", c.scenarios.samples, is);
  req(s, "scenarios", "clusters", c.scenarios.clusters, is);
  req(s, "scenarios", "probes", probes, is);
  req(s, "scenarios", "snapshots_per_step", c.scenarios.probe.snapshots_per_step, is);
  req(s, "scenarios", "sample_seed", c.scenarios.sample_seed, is);
  req(s, "scenarios", "cluster_seed", c.scenarios.cluster_seed, is);
  if (probes == "all") {
    c.scenarios.probe.probes = ProbeSet::kAllCells;
  } else if (probes == "wells") {
    c.scenarios.probe.probes = ProbeSet::kWells;
  } else {
    is.invalid.push_back("scenarios.probes must be 'all' or 'wells'");
  }

  const json& t = section(doc, "train", is);
  req(t, "train", "seeds", c.train.seeds, is);
  req(t, "train", "base_first_action", c.train.base_first_action, is);
  req(t, "train", "checkpoint_every", c.train.checkpoint_every, is);
  opt(t, "train", "eval_every", c.train.eval_every, is);

  if (doc.contains("ppo")) c.ppo = read_algo(doc.at("ppo"), "ppo", Algo::kPPO, is);
  if (doc.contains("a2c")) c.a2c = read_algo(doc.at("a2c"), "a2c", Algo::kA2C, is);
  if (doc.contains("full_state")) {
    FullStateSection f;
    req(doc.at("full_state"), "full_state", "hidden", f.hidden, is);
    req(doc.at("full_state"), "full_state", "learning_rate", f.learning_rate, is);
    c.full_state = f;
  }
  if (doc.contains("de")) {
    DeConfig de;
    const json& e = doc.at("de");
    req(e, "de", "population", de.population, is);
    req(e, "de", "iterations", de.iterations, is);
    req(e, "de", "crossover", de.crossover, is);
    req(e, "de", "f_min", de.f_min, is);
    req(e, "de", "f_max", de.f_max, is);
    req(e, "de", "seed", de.seed, is);
    opt(e, "de", "paper_literal_mutation", de.paper_literal_mutation, is);
    c.de = de;
  }

  if (!is.missing.empty() || !is.invalid.empty()) {
    std::string msg = "invalid config";
    if (!is.missing.empty()) msg += "; missing keys: " + join(is.missing);
    if (!is.invalid.empty()) msg += "; " + join(is.invalid);
    throw ConfigError(msg);
  }

  // Semantic checks, once every key is present.
  auto check = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      is.invalid.push_back(what + ": " + e.what());
    }
  };
  if (c.schema_version != kSchemaVersion)
    is.invalid.push_back("schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                         std::to_string(kSchemaVersion) + ")");
  if (c.case_id != "1" && c.case_id != "2" && c.case_id != "custom")
    is.invalid.push_back("case must be '1', '2' or 'custom'");
  if (c.workers < 1) is.invalid.push_back("workers must be >= 1");
  if (c.wells.pattern != "five_spot" && c.wells.pattern != "line_drive")
    is.invalid.push_back("wells.pattern must be 'five_spot' or 'line_drive'");
  else
    check("grid/wells", [&] { make_problem(c); });
  if (c.physics.control_steps < 1 || c.physics.substeps < 1 || !(c.physics.total_time > 0.0) ||
      !(c.physics.viscosity > 0.0))
    is.invalid.push_back("physics values must be positive");
  if (c.distribution.kind == "gaussian" && !(c.distribution.gaussian.sigma >= 0.0 && c.distribution.gaussian.corr_len > 0.0))
    is.invalid.push_back("distribution: sigma must be >= 0 and corr_len > 0");
  if (c.distribution.kind == "channel" &&
      !(c.distribution.channel.width_min > 0.0 && c.distribution.channel.width_min <= c.distribution.channel.width_max &&
        c.distribution.channel.width_max < c.grid.lx))
    is.invalid.push_back("distribution: need 0 < width_min <= width_max < grid.lx");
  if (c.scenarios.clusters < 1 || c.scenarios.samples < c.scenarios.clusters)
    is.invalid.push_back("scenarios: need 1 <= clusters <= samples");
  if (c.scenarios.probe.snapshots_per_step < 1 || c.physics.substeps % c.scenarios.probe.snapshots_per_step != 0)
    is.invalid.push_back("scenarios.snapshots_per_step must divide physics.substeps");
  if (c.train.seeds.empty()) is.invalid.push_back("train.seeds must not be empty");
  if (c.train.checkpoint_every < 0) is.invalid.push_back("train.checkpoint_every must be >= 0");
  for (auto* a : {&c.ppo, &c.a2c}) {
    if (!*a) continue;
    (*a)->train.eval_every = c.train.eval_every;
    (*a)->train.workers = c.workers;
    TrainConfig probe = (*a)->train;
    probe.layer_sizes = {1, 1};
    check(to_string(probe.algo), [&] { probe.validate(); });
    for (int h : (*a)->hidden)
      if (h < 1) is.invalid.push_back(to_string(probe.algo) + ".hidden sizes must be positive");
  }
  if (c.full_state && !(c.full_state->learning_rate > 0.0)) is.invalid.push_back("full_state.learning_rate must be positive");
  if (c.de) {
    c.de->workers = c.workers;
    check("de", [&] { c.de->validate(); });
  }
  if (!is.invalid.empty()) throw ConfigError("invalid config; " + join(is.invalid));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["case"] = c.case_id;
  j["desk"] = c.desk;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["grid"] = {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"lx", c.grid.lx}, {"ly", c.grid.ly}, {"porosity", c.grid.porosity}};
  j["wells"] = {{"pattern", c.wells.pattern}, {"total_rate", c.wells.total_rate}};
  if (c.wells.pattern == "line_drive") j["wells"]["row_stride"] = c.wells.row_stride;
  j["physics"] = {{"viscosity", c.physics.viscosity},
                  {"total_time", c.physics.total_time},
                  {"control_steps", c.physics.control_steps},
                  {"substeps", c.physics.substeps}};
  if (c.distribution.kind == "gaussian") {
    const auto& g = c.distribution.gaussian;
    j["distribution"] = {{"kind", "gaussian"}, {"mean", g.mean}, {"sigma", g.sigma}, {"corr_len", g.corr_len}};
  } else {
    const auto& ch = c.distribution.channel;
    j["distribution"] = {{"kind", "channel"},
                         {"width_min", ch.width_min},
                         {"width_max", ch.width_max},
                         {"g_high", ch.g_high},
                         {"g_low", ch.g_low}};
  }
  j["scenarios"] = {{"samples", c.scenarios.samples},
                    {"clusters", c.scenarios.clusters},
                    {"probes", c.scenarios.probe.probes == ProbeSet::kAllCells ? "all" : "wells"},
                    {"snapshots_per_step", c.scenarios.probe.snapshots_per_step},
                    {"sample_seed", c.scenarios.sample_seed},
                    {"cluster_seed", c.scenarios.cluster_seed}};
  j["train"] = {{"seeds", c.train.seeds},
                {"base_first_action", c.train.base_first_action},
                {"checkpoint_every", c.train.checkpoint_every},
                {"eval_every", c.train.eval_every}};
  if (c.ppo) j["ppo"] = algo_json(*c.ppo);
  if (c.a2c) j["a2c"] = algo_json(*c.a2c);
  if (c.full_state) j["full_state"] = {{"hidden", c.full_state->hidden}, {"learning_rate", c.full_state->learning_rate}};
  if (c.de) {
    j["de"] = {{"population", c.de->population},
               {"iterations", c.de->iterations},
               {"crossover", c.de->crossover},
               {"f_min", c.de->f_min},
               {"f_max", c.de->f_max},
               {"seed", c.de->seed},
               {"paper_literal_mutation", c.de->paper_literal_mutation}};
  }
  return j;
}

namespace {

AlgoSection ppo_section(int actors, int steps, double lr, std::int64_t episodes, std::vector<int> hidden) {
  AlgoSection a{default_train_config(Algo::kPPO), std::move(hidden)};
  a.train.actors = actors;
  a.train.steps = steps;
  a.train.minibatch = 16;
  a.train.epochs = 20;
  a.train.learning_rate = lr;
  a.train.total_episodes = episodes;
  return a;
}

AlgoSection a2c_section(int actors, int steps, double lr, std::int64_t episodes, std::vector<int> hidden,
                        double log_std_init) {
  AlgoSection a{default_train_config(Algo::kA2C), std::move(hidden)};
  a.train.actors = actors;
  a.train.steps = steps;
  a.train.learning_rate = lr;
  a.train.total_episodes = episodes;
  a.train.log_std_init = log_std_init;
  return a;
}

}  // namespace

RunConfig preset(const std::string& name) {
  RunConfig c;
  const bool case1 = name == "case1-desk" || name == "case1-full";
  const bool full = name == "case1-full" || name == "case2-full";
  if (!case1 && name != "case2-desk" && name != "case2-full")
    throw ConfigError("unknown preset '" + name + "' (expected one of case1-desk, case2-desk, case1-full, case2-full)");
  c.case_id = case1 ? "1" : "2";
  c.desk = !full;
  c.output_dir = "runs/" + name;
  c.grid = full ? GridConfig{61, 61, 1200.0, 1200.0, 0.2} : GridConfig{31, 31, 1200.0, 1200.0, 0.2};
  if (case1) {
    c.wells = {"line_drive", 2, 2304.0};
    c.physics.total_time = 125.0;
    c.distribution.kind = "channel";
  } else {
    c.wells = {"five_spot", 2, 8064.0};
    c.physics.total_time = 25.0;
    c.distribution.kind = "gaussian";
  }
  c.scenarios.samples = full ? 1000 : 64;
  c.scenarios.clusters = full ? 16 : 8;
  const std::vector<int> hidden = case1 ? std::vector<int>{150, 100, 80} : std::vector<int>{20, 20};
  DeConfig de;
  de.seed = 11;
  if (full) {
    c.ppo = ppo_section(64, 50, case1 ? 1e-6 : 5e-4, 60000, hidden);
    c.a2c = case1 ? a2c_section(64, 50, 2e-4, 60000, hidden, 0.0) : a2c_section(32, 20, 1e-4, 60000, hidden, 0.0);
    c.full_state = FullStateSection{{4000, 2000, 800, 300}, case1 ? 1e-5 : 5e-6};
    de.population = case1 ? 310 : 20;
    de.iterations = 750;
  } else {
    c.ppo = ppo_section(8, 50, 5e-4, 4000, hidden);
    c.a2c = a2c_section(8, 5, 2e-3, 4000, hidden, -1.0);
    c.full_state = FullStateSection{{64, 32}, 1e-4};
    de.population = case1 ? 40 : 20;
    de.iterations = case1 ? 200 : 750;
  }
  c.de = de;
  return parse_run_config(to_json(c));
}

std::vector<std::string> preset_names() { return {"case1-desk", "case2-desk", "case1-full", "case2-full"}; }

ReservoirProblem make_problem(const RunConfig& c) {
  Grid grid(c.grid.nx, c.grid.ny, c.grid.lx, c.grid.ly, c.grid.porosity);
  WellSet wells = c.wells.pattern == "line_drive" ? line_drive_wells(grid, c.wells.row_stride, c.wells.total_rate)
                                                  : five_spot_wells(grid, c.wells.total_rate);
  return ReservoirProblem{grid, wells, c.physics.viscosity, c.physics.total_time, c.physics.control_steps,
                          c.physics.substeps, 0.0};
}

}  // namespace wellrl
