#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wellrl/random.hpp"

namespace wellrl {

/// Shared-trunk actor-critic MLP with a state-independent Gaussian log-std.
///
/// layer_sizes = [obs_dim, hidden..., action_dim]. Hidden layers use tanh and
/// form the trunk; the actor head (action mean) and critic head (scalar value)
/// are linear maps from the last trunk activation. All parameters live in one
/// flat vector, in this order:
///   per trunk layer: W (out x in, column-major), b (out)
///   actor W (n_a x h), actor b (n_a), critic W (1 x h), critic b (1), log_std (n_a)
class ActorCritic {
 public:
  explicit ActorCritic(std::vector<int> layer_sizes);

  /// Orthogonal weights (gain sqrt(2) trunk, 0.01 actor, 1 critic), zero biases.
  void initialize(Rng& rng, double log_std_init = 0.0);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int action_dim() const { return sizes_.back(); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  Eigen::Map<const Eigen::VectorXd> log_std() const;

  /// Intermediate activations kept for the reverse pass; activations[0] is the input.
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;
  };

  struct Output {
    Eigen::MatrixXd mean;   // n_a x batch
    Eigen::VectorXd value;  // batch
  };

  /// obs is obs_dim x batch (one sample per column).
  Output forward(const Eigen::MatrixXd& obs, Tape* tape = nullptr) const;

  /// Gradient of a scalar loss w.r.t. all parameters, given the loss sensitivities
  /// to the outputs of the forward pass recorded in `tape`.
  Eigen::VectorXd backward(const Tape& tape, const Eigen::MatrixXd& d_mean,
                           const Eigen::VectorXd& d_value, const Eigen::VectorXd& d_log_std) const;

  std::vector<double> mean_action(std::span<const double> obs) const;
  double value(std::span<const double> obs) const;

 private:
  struct Block {
    Eigen::Index offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };
  Eigen::Map<const Eigen::MatrixXd> view(const Block& b) const;
  Eigen::Map<Eigen::MatrixXd> view(const Block& b);

  std::vector<int> sizes_;
  std::vector<Block> trunk_w_, trunk_b_;
  Block actor_w_{}, actor_b_{}, critic_w_{}, critic_b_{}, log_std_{};
  Eigen::VectorXd params_;
};

/// Per-sample diagonal Gaussian log-density and entropy.
struct GaussianTerms {
  Eigen::VectorXd logp;
  Eigen::VectorXd entropy;
};

GaussianTerms gaussian_logprob_entropy(const Eigen::MatrixXd& mean, const Eigen::VectorXd& log_std,
                                       const Eigen::MatrixXd& action);

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  double learning_rate() const { return lr_; }
  std::int64_t steps() const { return t_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct CheckpointInfo {
  std::int64_t step_count = 0;
  std::uint64_t seed = 0;
  std::string tag;
};

/// Layout: 8-byte magic "WRLCKPT1", uint64 LE header length H, H bytes of JSON
/// header {format, version, layer_sizes, parameter_count, step_count, seed, tag},
/// then parameter_count IEEE-754 float64 values, little-endian, in the flat
/// parameter order documented on ActorCritic.
void save_checkpoint(const std::filesystem::path& path, const ActorCritic& net, const CheckpointInfo& info);

struct LoadedCheckpoint {
  ActorCritic net;
  CheckpointInfo info;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wellrl
