#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "wellrl/random.hpp"
#include "wellrl/well_env.hpp"

namespace wellrl {

struct DeConfig {
  int population = 20;
  /// Generations, counting the initial population as the first one.
  int iterations = 750;
  double crossover = 0.9;
  double f_min = 0.5;
  double f_max = 1.0;
  /// best + F (x_r1 + x_r2) instead of best + F (x_r1 - x_r2).
  bool paper_literal_mutation = false;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

using Fitness = std::function<double(std::span<const double>)>;

struct DeResult {
  std::vector<double> best;
  double best_fitness = 0.0;
  /// Best-so-far fitness after each generation; size == iterations.
  std::vector<double> history;
  std::int64_t evaluations = 0;
};

/// DE/best/1/bin with clipping and greedy (>=) selection. Trial vectors of a
/// generation are built from the previous generation and evaluated in parallel.
/// `initial` members replace the first random individuals.
DeResult de_optimize(const Fitness& fitness, const Bounds& bounds, const DeConfig& cfg, Rng& rng,
                     const std::vector<std::vector<double>>& initial = {});

/// Open-loop control sequence, control_steps x action_dim, row-major by step.
int sequence_length(const ReservoirProblem& problem);
Bounds sequence_bounds(const ReservoirProblem& problem);
std::vector<double> base_sequence(const ReservoirProblem& problem);

/// Undiscounted return of an open-loop sequence on a fixed realisation (no first-step override).
double sequence_fitness(std::span<const double> sequence, std::shared_ptr<const ReservoirProblem> problem,
                        std::shared_ptr<const FlowModel> model);

struct DeBenchmark {
  std::vector<DeResult> runs;
  std::vector<double> best_returns;
  std::vector<double> base_returns;
  double mean = 0.0;
  std::int64_t evaluations = 0;
};

/// One DE run per realisation, each seeded with the base sequence.
DeBenchmark de_benchmark(std::shared_ptr<const ReservoirProblem> problem, const ScenarioPool& pool,
                         const DeConfig& cfg);

}  // namespace wellrl
