#include "wellrl/de_baseline.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "wellrl/parallel.hpp"

namespace wellrl {

void DeConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("de config: " + m); };
  if (population < 4) fail("population must be >= 4");
  if (iterations < 1) fail("iterations must be >= 1");
  if (!(crossover >= 0.0 && crossover <= 1.0)) fail("crossover must lie in [0, 1]");
  if (!(f_min >= 0.0 && f_min <= f_max)) fail("need 0 <= f_min <= f_max");
}

DeResult de_optimize(const Fitness& fitness, const Bounds& bounds, const DeConfig& cfg, Rng& rng,
                     const std::vector<std::vector<double>>& initial) {
  cfg.validate();
  const std::size_t dim = bounds.lower.size();
  if (dim == 0 || bounds.upper.size() != dim) throw std::invalid_argument("bounds must be non-empty and aligned");
  for (std::size_t d = 0; d < dim; ++d) {
    if (!(bounds.lower[d] <= bounds.upper[d])) throw std::invalid_argument("lower bound exceeds upper bound");
  }
  const auto pop = static_cast<std::size_t>(cfg.population);
  if (initial.size() > pop) throw std::invalid_argument("more initial members than population");
  auto clip = [&](std::vector<double>& x) {
    for (std::size_t d = 0; d < dim; ++d) x[d] = std::clamp(x[d], bounds.lower[d], bounds.upper[d]);
  };

  std::vector<std::vector<double>> x(pop, std::vector<double>(dim));
  for (std::size_t i = 0; i < pop; ++i) {
    if (i < initial.size()) {
      if (initial[i].size() != dim) throw std::invalid_argument("initial member has wrong length");
      x[i] = initial[i];
      clip(x[i]);
    } else {
      for (std::size_t d = 0; d < dim; ++d) x[i][d] = uniform(rng, bounds.lower[d], bounds.upper[d]);
    }
  }
  std::vector<double> f(pop);
  parallel_for(pop, cfg.workers, [&](std::size_t i) { f[i] = fitness(x[i]); });

  DeResult r;
  r.evaluations = static_cast<std::int64_t>(pop);
  auto best_index = [&] {
    std::size_t b = 0;
    for (std::size_t i = 1; i < pop; ++i)
      if (f[i] > f[b]) b = i;
    return b;
  };
  std::size_t best = best_index();
  r.history.push_back(f[best]);

  std::vector<std::vector<double>> trial(pop, std::vector<double>(dim));
  std::vector<double> ft(pop);
  for (int gen = 1; gen < cfg.iterations; ++gen) {
    const double scale = uniform(rng, cfg.f_min, cfg.f_max);
    for (std::size_t i = 0; i < pop; ++i) {
      std::size_t r1, r2;
      do r1 = uniform_index(rng, pop);
      while (r1 == i);
      do r2 = uniform_index(rng, pop);
      while (r2 == i || r2 == r1);
      const std::size_t forced = uniform_index(rng, dim);
      for (std::size_t d = 0; d < dim; ++d) {
        const double u = uniform(rng, 0.0, 1.0);
        if (u < cfg.crossover || d == forced) {
          const double diff = cfg.paper_literal_mutation ? x[r1][d] + x[r2][d] : x[r1][d] - x[r2][d];
          trial[i][d] = x[best][d] + scale * diff;
        } else {
          trial[i][d] = x[i][d];
        }
      }
      clip(trial[i]);
    }
    parallel_for(pop, cfg.workers, [&](std::size_t i) { ft[i] = fitness(trial[i]); });
    r.evaluations += static_cast<std::int64_t>(pop);
    for (std::size_t i = 0; i < pop; ++i) {
      if (ft[i] >= f[i]) {
        x[i] = trial[i];
        f[i] = ft[i];
      }
    }
    best = best_index();
    r.history.push_back(f[best]);
  }
  r.best = x[best];
  r.best_fitness = f[best];
  return r;
}

int sequence_length(const ReservoirProblem& problem) {
  return problem.control_steps * ActionCodec(problem.wells).action_dim();
}

Bounds sequence_bounds(const ReservoirProblem& problem) {
  const auto n = static_cast<std::size_t>(sequence_length(problem));
  return {std::vector<double>(n, kMinWeight), std::vector<double>(n, kMaxWeight)};
}

std::vector<double> base_sequence(const ReservoirProblem& problem) {
  return std::vector<double>(static_cast<std::size_t>(sequence_length(problem)), kMaxWeight);
}

double sequence_fitness(std::span<const double> sequence, std::shared_ptr<const ReservoirProblem> problem,
                        std::shared_ptr<const FlowModel> model) {
  WellEnv env(problem, ScenarioPool{std::move(model)}, EnvConfig{}, 0);
  const auto dim = static_cast<std::size_t>(env.action_dim());
  if (sequence.size() != dim * static_cast<std::size_t>(problem->control_steps))
    throw std::invalid_argument("control sequence has wrong length");
  env.reset_to(0);
  double total = 0.0;
  for (int k = 0; k < problem->control_steps; ++k) total += env.step(sequence.subspan(k * dim, dim)).reward;
  return total;
}

DeBenchmark de_benchmark(std::shared_ptr<const ReservoirProblem> problem, const ScenarioPool& pool,
                         const DeConfig& cfg) {
  DeBenchmark b;
  const Bounds bounds = sequence_bounds(*problem);
  const std::vector<double> base = base_sequence(*problem);
  for (std::size_t p = 0; p < pool.size(); ++p) {
    const auto model = pool[p];
    Fitness fit = [&](std::span<const double> s) { return sequence_fitness(s, problem, model); };
    Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(p), 0xDE});
    b.base_returns.push_back(fit(base));
    b.runs.push_back(de_optimize(fit, bounds, cfg, rng, {base}));
    b.best_returns.push_back(b.runs.back().best_fitness);
    b.evaluations += b.runs.back().evaluations;
  }
  if (!b.best_returns.empty())
    b.mean = std::accumulate(b.best_returns.begin(), b.best_returns.end(), 0.0) / static_cast<double>(b.best_returns.size());
  return b;
}

}  // namespace wellrl
