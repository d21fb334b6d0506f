#include "wellrl/rl_train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wellrl/error.hpp"
#include "wellrl/parallel.hpp"

namespace wellrl {

std::string to_string(Algo algo) { return algo == Algo::kPPO ? "ppo" : "a2c"; }

Algo parse_algo(const std::string& name) {
  if (name == "ppo" || name == "PPO") return Algo::kPPO;
  if (name == "a2c" || name == "A2C") return Algo::kA2C;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected ppo or a2c)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (actors < 1) fail("actors must be >= 1");
  if (steps < 1) fail("steps must be >= 1");
  if (algo == Algo::kPPO) {
    if (minibatch < 1 || minibatch > actors * steps) fail("minibatch must lie in [1, actors * steps]");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(clip_range > 0.0 && clip_range < 1.0)) fail("clip_range must lie in (0, 1)");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (total_episodes < 1) fail("total_episodes must be >= 1");
  if (eval_every < 1) fail("eval_every must be >= 1");
  if (layer_sizes.size() < 2) fail("layer_sizes needs at least input and output");
}

TrainConfig default_train_config(Algo algo) {
  TrainConfig c;
  c.algo = algo;
  if (algo == Algo::kA2C) {
    c.entropy_coef = 0.0;
    c.normalize_advantage = false;
    c.epochs = 1;
  }
  return c;
}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const double> dones, double bootstrap_value, double gamma, double lambda,
                 std::span<double> advantages, std::span<double> returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n || advantages.size() != n || returns.size() != n)
    throw std::invalid_argument("GAE inputs must have equal length");
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double next_value = (k + 1 < n) ? values[k + 1] : bootstrap_value;
    const double live = 1.0 - dones[k];
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    advantages[k] = next_adv;
    returns[k] = next_adv + values[k];
  }
}

void compute_gae(RolloutBuffer& b, double gamma, double lambda) {
  b.advantages.resize(b.size());
  b.returns.resize(b.size());
  const auto t = static_cast<std::size_t>(b.steps);
  for (int a = 0; a < b.actors; ++a) {
    const std::size_t off = static_cast<std::size_t>(a) * t;
    compute_gae({b.rewards.data() + off, t}, {b.values.data() + off, t}, {b.dones.data() + off, t},
                b.last_values[a], gamma, lambda, {b.advantages.data() + off, t}, {b.returns.data() + off, t});
  }
}

RolloutCollector::RolloutCollector(std::vector<std::unique_ptr<Environment>> envs, std::uint64_t seed)
    : envs_(std::move(envs)) {
  if (envs_.empty()) throw std::invalid_argument("need at least one environment");
  for (std::size_t a = 0; a < envs_.size(); ++a) {
    rngs_.push_back(make_rng(seed, {a, 0x5A}));
    obs_.push_back(envs_[a]->reset());
  }
}

RolloutBuffer RolloutCollector::collect(const ActorCritic& net, int steps, int workers) {
  const int n = actors();
  const int obs_dim = net.input_dim();
  const int act_dim = net.action_dim();
  RolloutBuffer b;
  b.actors = n;
  b.steps = steps;
  b.observations.resize(obs_dim, b.size());
  b.actions.resize(act_dim, b.size());
  b.log_probs.resize(b.size());
  b.rewards.resize(b.size());
  b.values.resize(b.size());
  b.dones.resize(b.size());
  b.last_values.resize(n);
  std::vector<int> episodes(n, 0);
  const Eigen::VectorXd log_std = net.log_std();
  const Eigen::ArrayXd std_dev = log_std.array().exp();

  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t a) {
    Environment& env = *envs_[a];
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < steps; ++t) {
      const Eigen::Index col = static_cast<Eigen::Index>(a) * steps + t;
      const Eigen::Map<const Eigen::VectorXd> o(obs_[a].data(), obs_dim);
      b.observations.col(col) = o;
      const auto out = net.forward(b.observations.col(col));
      Eigen::VectorXd action(act_dim);
      for (int i = 0; i < act_dim; ++i) action[i] = out.mean(i, 0) + std_dev[i] * normal(rngs_[a]);
      b.actions.col(col) = action;
      b.log_probs[col] = gaussian_logprob_entropy(out.mean, log_std, action).logp[0];
      b.values[col] = out.value[0];
      Transition tr = env.step({action.data(), static_cast<std::size_t>(act_dim)});
      b.rewards[col] = tr.reward;
      b.dones[col] = tr.done ? 1.0 : 0.0;
      if (tr.done) {
        ++episodes[a];
        obs_[a] = env.reset();
      } else {
        obs_[a] = std::move(tr.observation);
      }
    }
    const Eigen::Map<const Eigen::VectorXd> o(obs_[a].data(), obs_dim);
    b.last_values[a] = net.forward(Eigen::MatrixXd(o)).value[0];
  });
  b.completed_episodes = std::accumulate(episodes.begin(), episodes.end(), 0);
  return b;
}

Minibatch gather(const RolloutBuffer& b, std::span<const Eigen::Index> cols) {
  const auto m = static_cast<Eigen::Index>(cols.size());
  Minibatch mb;
  mb.observations.resize(b.observations.rows(), m);
  mb.actions.resize(b.actions.rows(), m);
  mb.old_log_probs.resize(m);
  mb.advantages.resize(m);
  mb.returns.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index c = cols[static_cast<std::size_t>(k)];
    mb.observations.col(k) = b.observations.col(c);
    mb.actions.col(k) = b.actions.col(c);
    mb.old_log_probs[k] = b.log_probs[c];
    mb.advantages[k] = b.advantages[c];
    mb.returns[k] = b.returns[c];
  }
  return mb;
}

namespace {

// Shared tail of both losses: given dL/dlogp per sample, assemble value and
// entropy terms and run the reverse pass.
LossTerms finish_loss(const ActorCritic& net, const Minibatch& batch, const TrainConfig& cfg,
                      const ActorCritic::Tape& tape, const ActorCritic::Output& out, const GaussianTerms& g,
                      double policy_loss, const Eigen::VectorXd& d_logp, bool with_grad) {
  const double n = static_cast<double>(batch.returns.size());
  LossTerms t;
  t.policy = policy_loss;
  t.value = (out.value - batch.returns).squaredNorm() / n;
  t.entropy = g.entropy.mean();
  t.total = t.policy + cfg.value_coef * t.value - cfg.entropy_coef * t.entropy;
  if (!std::isfinite(t.total)) {
    std::ostringstream msg;
    msg << "non-finite loss (policy " << t.policy << ", value " << t.value << ", entropy " << t.entropy << ")";
    throw NumericalError(msg.str());
  }
  if (!with_grad) return t;

  const Eigen::VectorXd log_std = net.log_std();
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const Eigen::MatrixXd diff = batch.actions - out.mean;
  Eigen::MatrixXd d_mean = (diff.array().colwise() * inv_var).matrix();
  d_mean *= d_logp.asDiagonal();
  const Eigen::MatrixXd z2 = (diff.array().square().colwise() * inv_var).matrix();
  Eigen::VectorXd d_log_std = (z2.array() - 1.0).matrix() * d_logp;
  d_log_std.array() -= cfg.entropy_coef;
  const Eigen::VectorXd d_value = (2.0 * cfg.value_coef / n) * (out.value - batch.returns);
  t.grad = net.backward(tape, d_mean, d_value, d_log_std);
  return t;
}

}  // namespace

LossTerms a2c_loss(const ActorCritic& net, const Minibatch& batch, const TrainConfig& cfg, bool with_grad) {
  ActorCritic::Tape tape;
  const auto out = net.forward(batch.observations, with_grad ? &tape : nullptr);
  const auto g = gaussian_logprob_entropy(out.mean, net.log_std(), batch.actions);
  const double n = static_cast<double>(batch.advantages.size());
  const double policy = -(g.logp.array() * batch.advantages.array()).sum() / n;
  const Eigen::VectorXd d_logp = -batch.advantages / n;
  return finish_loss(net, batch, cfg, tape, out, g, policy, d_logp, with_grad);
}

LossTerms ppo_loss(const ActorCritic& net, const Minibatch& batch, const TrainConfig& cfg, bool with_grad) {
  ActorCritic::Tape tape;
  const auto out = net.forward(batch.observations, with_grad ? &tape : nullptr);
  const auto g = gaussian_logprob_entropy(out.mean, net.log_std(), batch.actions);
  const Eigen::Index m = batch.advantages.size();
  const double n = static_cast<double>(m);
  const double lo = 1.0 - cfg.clip_range, hi = 1.0 + cfg.clip_range;
  double surrogate = 0.0;
  int clipped = 0;
  Eigen::VectorXd d_logp(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double ratio = std::exp(g.logp[k] - batch.old_log_probs[k]);
    const double adv = batch.advantages[k];
    const double unclipped = ratio * adv;
    const double clipped_term = std::clamp(ratio, lo, hi) * adv;
    // The clipped branch is constant in theta, so only the unclipped branch carries gradient.
    if (unclipped <= clipped_term) {
      surrogate += unclipped;
      d_logp[k] = -adv * ratio / n;
    } else {
      surrogate += clipped_term;
      d_logp[k] = 0.0;
    }
    if (std::abs(ratio - 1.0) > cfg.clip_range) ++clipped;
  }
  auto t = finish_loss(net, batch, cfg, tape, out, g, -surrogate / n, d_logp, with_grad);
  t.clip_fraction = clipped / n;
  return t;
}

void normalize_advantages(Eigen::VectorXd& adv) {
  if (adv.size() < 2) return;
  const double mean = adv.mean();
  const double var = (adv.array() - mean).square().sum() / static_cast<double>(adv.size() - 1);
  adv = ((adv.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
}

double clip_grad_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0) {
    const double coef = max_norm / (norm + 1e-6);
    if (coef < 1.0) grad *= coef;
  }
  return norm;
}

UpdateStats a2c_update(ActorCritic& net, Adam& opt, const RolloutBuffer& buffer, const TrainConfig& cfg) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(buffer.size()));
  std::iota(all.begin(), all.end(), 0);
  Minibatch batch = gather(buffer, all);
  if (cfg.normalize_advantage) normalize_advantages(batch.advantages);
  LossTerms t = a2c_loss(net, batch, cfg, true);
  clip_grad_norm(t.grad, cfg.max_grad_norm);
  opt.step(net.parameters(), t.grad);
  return {t.policy, t.value, t.entropy, 0.0, 1};
}

UpdateStats ppo_update(ActorCritic& net, Adam& opt, const RolloutBuffer& buffer, const TrainConfig& cfg,
                       Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(buffer.size()));
  std::iota(idx.begin(), idx.end(), 0);
  UpdateStats s;
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start < idx.size(); start += mb) {
      const std::size_t len = std::min(mb, idx.size() - start);
      Minibatch batch = gather(buffer, std::span<const Eigen::Index>(idx).subspan(start, len));
      if (cfg.normalize_advantage) normalize_advantages(batch.advantages);
      LossTerms t = ppo_loss(net, batch, cfg, true);
      clip_grad_norm(t.grad, cfg.max_grad_norm);
      opt.step(net.parameters(), t.grad);
      s.policy_loss += t.policy;
      s.value_loss += t.value;
      s.entropy += t.entropy;
      s.clip_fraction += t.clip_fraction;
      ++s.gradient_steps;
    }
  }
  const double k = std::max(s.gradient_steps, 1);
  s.policy_loss /= k;
  s.value_loss /= k;
  s.entropy /= k;
  s.clip_fraction /= k;
  return s;
}

TrainResult train(const TrainConfig& cfg, const TrainingSetup& setup) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainResult result{ActorCritic(cfg.layer_sizes), {}, 0, 0};
  ActorCritic& net = result.net;
  Rng init_rng = make_rng(cfg.seed, {0x1417});
  net.initialize(init_rng, cfg.log_std_init);
  Adam opt(net.parameter_count(), cfg.learning_rate);
  Rng shuffle_rng = make_rng(cfg.seed, {0x5F});

  std::vector<std::unique_ptr<Environment>> envs;
  for (int a = 0; a < cfg.actors; ++a) {
    envs.push_back(setup.make_env(a));
    if (envs.back()->observation_dim() != net.input_dim() || envs.back()->action_dim() != net.action_dim())
      throw std::invalid_argument("network layer sizes do not match the environment's observation/action dims");
  }
  RolloutCollector collector(std::move(envs), cfg.seed);

  for (int iteration = 1; result.episodes < cfg.total_episodes; ++iteration) {
    RolloutBuffer buffer = collector.collect(net, cfg.steps, cfg.workers);
    compute_gae(buffer, cfg.gamma, cfg.gae_lambda);
    const UpdateStats stats = cfg.algo == Algo::kPPO ? ppo_update(net, opt, buffer, cfg, shuffle_rng)
                                                     : a2c_update(net, opt, buffer, cfg);
    result.episodes += buffer.completed_episodes;
    result.env_steps += buffer.size();

    IterationRecord rec;
    rec.iteration = iteration;
    rec.episodes = result.episodes;
    rec.policy_loss = stats.policy_loss;
    rec.value_loss = stats.value_loss;
    rec.entropy = stats.entropy;
    const bool last = result.episodes >= cfg.total_episodes;
    if (iteration % cfg.eval_every == 0 || last) {
      rec.evaluated = true;
      if (setup.train_return) rec.train_return = setup.train_return(net);
      if (setup.eval_return) rec.eval_return = setup.eval_return(net);
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (setup.on_iteration) setup.on_iteration(rec, net);
  }
  return result;
}

Policy mean_policy(std::shared_ptr<const ActorCritic> net) {
  return [net = std::move(net)](std::span<const double> obs) { return net->mean_action(obs); };
}

TrainingSetup make_well_setup(std::shared_ptr<const ReservoirProblem> problem, ScenarioPool train_pool,
                              ScenarioPool eval_pool, EnvConfig env_config, std::uint64_t seed, int workers) {
  TrainingSetup s;
  s.make_env = [=](int actor) -> std::unique_ptr<Environment> {
    Rng r = make_rng(seed, {static_cast<std::uint64_t>(actor), 0xE4});
    return std::make_unique<WellEnv>(problem, train_pool, env_config, r());
  };
  auto monitor = [=](const ScenarioPool& pool) {
    return [=](const ActorCritic& net) {
      auto view = std::shared_ptr<const ActorCritic>(&net, [](const ActorCritic*) {});
      return mean_return_over(mean_policy(view), problem, pool, env_config, workers);
    };
  };
  s.train_return = monitor(train_pool);
  if (!eval_pool.empty()) s.eval_return = monitor(eval_pool);
  return s;
}

}  // namespace wellrl
