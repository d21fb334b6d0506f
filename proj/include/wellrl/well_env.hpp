#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "wellrl/environment.hpp"
#include "wellrl/flow_sim.hpp"
#include "wellrl/grid.hpp"
#include "wellrl/random.hpp"

namespace wellrl {

struct ReservoirProblem {
  Grid grid;
  WellSet wells;
  double viscosity = 0.3;
  double total_time = 25.0;
  int control_steps = 5;
  int substeps = 10;
  double initial_saturation = 0.0;

  double control_dt() const { return total_time / control_steps; }
};

/// Channel case: line drive, T = 125 days.
ReservoirProblem case1_problem(const Grid& grid);
/// Correlated-field case: five-spot, T = 25 days.
ReservoirProblem case2_problem(const Grid& grid);

inline constexpr double kMinWeight = 0.001;
inline constexpr double kMaxWeight = 1.0;

/// Producer i gets -(w_i / sum producer w) c, injector i gets
/// +(w_{np+i} / sum injector w) c.
std::vector<double> weights_to_rates(std::span<const double> weights, const WellSet& wells);

/// Translates raw policy outputs to per-well valve weights. With a single
/// injector its weight is a no-op after normalisation, so the action only
/// carries producer weights.
class ActionCodec {
 public:
  explicit ActionCodec(const WellSet& wells);

  int action_dim() const { return action_dim_; }
  /// Clips each entry to [0.001, 1] and expands to n_p + n_i weights.
  std::vector<double> to_weights(std::span<const double> action) const;
  std::vector<double> base_action() const { return std::vector<double>(action_dim_, kMaxWeight); }

 private:
  int producers_;
  int injectors_;
  int action_dim_;
};

using ScenarioPool = std::vector<std::shared_ptr<const FlowModel>>;

std::shared_ptr<const FlowModel> make_flow_model(const ReservoirProblem& problem, const PermField& field);
ScenarioPool make_pool(const ReservoirProblem& problem, std::span<const PermField> fields);

struct EnvConfig {
  /// Execute all-equal weights on the first control step whatever the policy says.
  bool base_first_action = false;
  /// Observe every cell saturation instead of the well observation vector.
  bool full_state = false;
};

/// Observation layout (well mode): saturation at producers, pressure at producers,
/// pressure at injectors. Pressures are mapped to [-1, 1] per observation via
/// (p - mean) / max|p - mean|; all-equal pressures map to 0.
class WellEnv : public Environment {
 public:
  WellEnv(std::shared_ptr<const ReservoirProblem> problem, ScenarioPool pool, EnvConfig config,
          std::uint64_t seed);

  int observation_dim() const override;
  int action_dim() const override { return codec_.action_dim(); }

  /// Draws a realisation uniformly from the pool.
  std::vector<double> reset() override;
  std::vector<double> reset_to(std::size_t scenario);
  Transition step(std::span<const double> action) override;

  const ReservoirProblem& problem() const { return *problem_; }
  const ActionCodec& codec() const { return codec_; }
  const ReservoirState& state() const { return state_; }
  std::size_t scenario_index() const { return scenario_; }
  std::size_t pool_size() const { return pool_.size(); }
  int steps_taken() const { return step_; }
  bool done() const { return step_ >= problem_->control_steps; }
  const std::vector<double>& last_weights() const { return last_weights_; }
  const std::vector<double>& last_rates() const { return last_rates_; }
  void set_substep_observer(SubstepObserver observer) { observer_ = std::move(observer); }

 private:
  std::vector<double> observe() const;

  std::shared_ptr<const ReservoirProblem> problem_;
  ScenarioPool pool_;
  EnvConfig config_;
  ActionCodec codec_;
  Rng rng_;
  std::size_t scenario_ = 0;
  int step_ = 0;
  bool started_ = false;
  ReservoirState state_;
  std::vector<double> last_weights_;
  std::vector<double> last_rates_;
  SubstepObserver observer_;
};

/// Maps an observation to a raw action (clipped by the environment).
using Policy = std::function<std::vector<double>(std::span<const double>)>;

/// All valves equally open.
Policy base_policy(int action_dim);

struct EpisodeStep {
  std::vector<double> observation;
  std::vector<double> action;
  std::vector<double> weights;
  std::vector<double> rates;
  double reward = 0.0;
};

struct EpisodeTrace {
  std::vector<EpisodeStep> steps;
  double total_return = 0.0;
};

EpisodeTrace run_episode(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                         std::shared_ptr<const FlowModel> model, const EnvConfig& config);

/// Undiscounted sum of rewards (recovery factor) over one episode on a fixed realisation.
double episode_return(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                      std::shared_ptr<const FlowModel> model, const EnvConfig& config);

/// Per-realisation returns, evaluated on `workers` threads; results are index-ordered.
std::vector<double> returns_over(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                                 const ScenarioPool& pool, const EnvConfig& config, int workers = 1);

/// Arithmetic mean of returns_over, summed in index order.
double mean_return_over(const Policy& policy, std::shared_ptr<const ReservoirProblem> problem,
                        const ScenarioPool& pool, const EnvConfig& config, int workers = 1);

/// One row per step: step, reward, then obs_*, action_*, rate_* columns.
void write_trace_csv(const std::filesystem::path& path, const EpisodeTrace& trace);

}  // namespace wellrl
