#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wellrl/environment.hpp"
#include "wellrl/neural.hpp"
#include "wellrl/random.hpp"
#include "wellrl/well_env.hpp"

namespace wellrl {

enum class Algo { kA2C, kPPO };

std::string to_string(Algo algo);
Algo parse_algo(const std::string& name);

struct TrainConfig {
  Algo algo = Algo::kPPO;
  int actors = 8;      // N
  int steps = 50;      // T, per actor per iteration
  int minibatch = 16;  // M (PPO only)
  int epochs = 20;     // K (PPO only)
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_range = 0.1;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 5e-4;
  double max_grad_norm = 0.5;
  bool normalize_advantage = true;
  std::int64_t total_episodes = 4000;
  int eval_every = 1;
  std::vector<int> layer_sizes;
  double log_std_init = 0.0;
  std::uint64_t seed = 1;
  int workers = 1;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Defaults for each algorithm (entropy 0.01 / 0.0, advantage normalisation on / off).
TrainConfig default_train_config(Algo algo);

/// N actors x T steps, flattened with column index actor * T + t.
struct RolloutBuffer {
  int actors = 0;
  int steps = 0;
  Eigen::MatrixXd observations;  // obs_dim x NT
  Eigen::MatrixXd actions;       // act_dim x NT, raw samples before clipping
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  Eigen::VectorXd dones;        // 1 if the episode ended with this transition
  Eigen::VectorXd last_values;  // per actor, V of the observation after step T
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  int completed_episodes = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(actors) * steps; }
};

/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t,
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, returns = A + V.
/// V_T is `bootstrap_value`.
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const double> dones, double bootstrap_value, double gamma, double lambda,
                 std::span<double> advantages, std::span<double> returns);

/// Fills advantages/returns of every actor's segment.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

/// Persistent actors: environments, current observations and sampling streams
/// survive across iterations; an environment is reset as soon as an episode ends.
class RolloutCollector {
 public:
  RolloutCollector(std::vector<std::unique_ptr<Environment>> envs, std::uint64_t seed);

  /// Runs every actor for `steps` transitions. Actors are independent, so the
  /// buffer does not depend on `workers`.
  RolloutBuffer collect(const ActorCritic& net, int steps, int workers);

  int actors() const { return static_cast<int>(envs_.size()); }
  Environment& env(int actor) { return *envs_[actor]; }

 private:
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<std::vector<double>> obs_;
  std::vector<Rng> rngs_;
};

struct Minibatch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

Minibatch gather(const RolloutBuffer& buffer, std::span<const Eigen::Index> columns);

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  Eigen::VectorXd grad;  // empty unless requested
};

/// -mean(logp A) + c_v mean((V - R)^2) - c_e mean(H). Advantages are constants.
LossTerms a2c_loss(const ActorCritic& net, const Minibatch& batch, const TrainConfig& cfg, bool with_grad);

/// -mean(min(r A, clip(r, 1-eps, 1+eps) A)) + c_v mean((V - R)^2) - c_e mean(H),
/// r = exp(logp - logp_old). Advantages are used as given (normalise before).
LossTerms ppo_loss(const ActorCritic& net, const Minibatch& batch, const TrainConfig& cfg, bool with_grad);

/// Zero-mean, unit-std (unbiased) advantages; batches of one are left unchanged.
void normalize_advantages(Eigen::VectorXd& advantages);

/// Rescales grad so its Euclidean norm is at most max_norm. Returns the original norm.
double clip_grad_norm(Eigen::VectorXd& grad, double max_norm);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  int gradient_steps = 0;
};

/// Single full-batch gradient step.
UpdateStats a2c_update(ActorCritic& net, Adam& optimizer, const RolloutBuffer& buffer, const TrainConfig& cfg);

/// K epochs over shuffled minibatches of size M.
UpdateStats ppo_update(ActorCritic& net, Adam& optimizer, const RolloutBuffer& buffer, const TrainConfig& cfg,
                       Rng& rng);

struct IterationRecord {
  int iteration = 0;
  std::int64_t episodes = 0;
  double train_return = 0.0;
  double eval_return = 0.0;
  bool evaluated = false;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double wall_time = 0.0;
};

struct TrainingSetup {
  std::function<std::unique_ptr<Environment>(int actor)> make_env;
  /// Monitoring returns of the deterministic (mean-action) policy.
  std::function<double(const ActorCritic&)> train_return;
  std::function<double(const ActorCritic&)> eval_return;
  std::function<void(const IterationRecord&, const ActorCritic&)> on_iteration;
};

struct TrainResult {
  ActorCritic net;
  std::vector<IterationRecord> log;
  std::int64_t episodes = 0;
  std::int64_t env_steps = 0;
};

/// Collect -> GAE -> update -> monitor until total_episodes complete episodes
/// have been collected.
TrainResult train(const TrainConfig& cfg, const TrainingSetup& setup);

/// Deterministic policy (Gaussian mean) backed by a shared network.
Policy mean_policy(std::shared_ptr<const ActorCritic> net);

/// Well-control training: actors draw realisations from `train_pool` at every
/// reset; monitoring uses mean_return_over on both pools.
TrainingSetup make_well_setup(std::shared_ptr<const ReservoirProblem> problem, ScenarioPool train_pool,
                              ScenarioPool eval_pool, EnvConfig env_config, std::uint64_t seed, int workers);

}  // namespace wellrl
