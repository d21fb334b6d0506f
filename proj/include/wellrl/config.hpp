#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wellrl/de_baseline.hpp"
#include "wellrl/perm_fields.hpp"
#include "wellrl/rl_train.hpp"
#include "wellrl/scenario_cluster.hpp"
#include "wellrl/well_env.hpp"

namespace wellrl {

inline constexpr int kSchemaVersion = 1;

struct GridConfig {
  int nx = 31;
  int ny = 31;
  double lx = 1200.0;
  double ly = 1200.0;
  double porosity = 0.2;
};

struct WellConfig {
  std::string pattern = "five_spot";  // five_spot | line_drive
  int row_stride = 2;                 // line_drive only
  double total_rate = 8064.0;
};

struct PhysicsConfig {
  double viscosity = 0.3;
  double total_time = 25.0;
  int control_steps = 5;
  int substeps = 10;
};

struct DistributionConfig {
  std::string kind = "gaussian";  // gaussian | channel
  GaussianFieldParams gaussian;
  ChannelDistribution channel;
};

struct ScenarioConfig {
  int samples = 64;
  int clusters = 8;
  ProbeConfig probe;
  std::uint64_t sample_seed = 7;
  std::uint64_t cluster_seed = 7;
};

struct TrainSection {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool base_first_action = true;
  int checkpoint_every = 10;
  int eval_every = 1;
};

/// One algorithm block. `hidden` excludes the input and output sizes, which
/// come from the environment.
struct AlgoSection {
  TrainConfig train;
  std::vector<int> hidden;
};

struct FullStateSection {
  std::vector<int> hidden;
  double learning_rate = 1e-5;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string case_id = "2";  // 1 | 2 | custom
  bool desk = true;
  std::string output_dir = "runs/case2-desk";
  int workers = 1;
  GridConfig grid;
  WellConfig wells;
  PhysicsConfig physics;
  DistributionConfig distribution;
  ScenarioConfig scenarios;
  TrainSection train;
  std::optional<AlgoSection> ppo;
  std::optional<AlgoSection> a2c;
  std::optional<FullStateSection> full_state;
  std::optional<DeConfig> de;

  const AlgoSection& algo(Algo a) const;
};

/// Validates the whole document before returning; throws ConfigError naming
/// every missing or invalid key.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// case1-desk, case2-desk, case1-full, case2-full.
RunConfig preset(const std::string& name);
std::vector<std::string> preset_names();

ReservoirProblem make_problem(const RunConfig& cfg);

}  // namespace wellrl
