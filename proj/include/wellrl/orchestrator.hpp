#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wellrl/config.hpp"

namespace wellrl {

/// SHA-1 of "blob <size>\0" + bytes, as git hashes file contents.
std::string git_blob_sha1(std::string_view bytes);
std::string file_sha1(const std::filesystem::path& path);

struct CommandOptions {
  Algo algo = Algo::kPPO;
  std::optional<int> frozen;
  bool full_state = false;
  std::ostream* log = nullptr;  // progress messages; nullptr silences them
};

struct StageOutcome {
  std::string stage;
  bool skipped = false;
  std::int64_t simulations = 0;
};

/// Every command is idempotent: a stage whose stamp (config section plus input
/// hashes) and recorded output hashes match the run manifest is skipped.
StageOutcome cmd_sample(const RunConfig& cfg, const CommandOptions& opts = {});
StageOutcome cmd_cluster(const RunConfig& cfg, const CommandOptions& opts = {});
std::vector<StageOutcome> cmd_train(const RunConfig& cfg, const CommandOptions& opts = {});
StageOutcome cmd_benchmark(const RunConfig& cfg, const CommandOptions& opts = {});
StageOutcome cmd_evaluate(const RunConfig& cfg, const CommandOptions& opts = {});
StageOutcome cmd_report(const RunConfig& cfg, const CommandOptions& opts = {});

/// Training variant directory name: ppo, a2c, ppo-full, ppo-frozen3, ...
std::string variant_name(Algo algo, bool full_state, std::optional<int> frozen);

struct ScenarioArchive {
  std::vector<PermField> samples;
  std::vector<int> labels;
  std::vector<int> training;
  std::vector<int> evaluation;
};

std::vector<PermField> load_samples(const RunConfig& cfg);
ScenarioArchive load_archive(const RunConfig& cfg);

struct AccountingRow {
  std::string algorithm;
  std::string formula;
  std::int64_t expected = 0;
  std::optional<std::int64_t> counted;
  std::string note;
};

/// Simulation-run accounting from the config alone: RL runs = episodes x seeds,
/// DE runs = generations x population x evaluation realisations.
std::vector<AccountingRow> accounting_table(const RunConfig& cfg);

/// Per-iteration training log rows as written by cmd_train.
struct LogRow {
  int iteration = 0;
  std::int64_t episodes = 0;
  double train_return = 0.0;
  double eval_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double wall_time = 0.0;
};
std::vector<LogRow> read_training_log(const std::filesystem::path& path);

}  // namespace wellrl
