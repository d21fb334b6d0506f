#include <gtest/gtest.h>

#include <mutex>

#include "wellrl/de_baseline.hpp"

using namespace wellrl;

namespace {

double neg_sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += (v - 0.3) * (v - 0.3);
  return -s;
}

Bounds box(int d, double lo, double hi) { return {std::vector<double>(d, lo), std::vector<double>(d, hi)}; }

}  // namespace

TEST(De, SphereConverges) {
  for (std::uint64_t seed : {1, 2, 3}) {
    DeConfig cfg;
    cfg.iterations = 300;
    Rng rng = make_rng(seed);
    DeResult r = de_optimize(neg_sphere, box(5, -5, 5), cfg, rng);
    EXPECT_GT(r.best_fitness, -1e-8) << "seed " << seed;
    for (double v : r.best) EXPECT_NEAR(v, 0.3, 1e-4);
  }
}

TEST(De, HistoryAndEvaluationCount) {
  DeConfig cfg;
  cfg.population = 8;
  cfg.iterations = 25;
  Rng rng = make_rng(4);
  DeResult r = de_optimize(neg_sphere, box(3, -1, 1), cfg, rng);
  ASSERT_EQ(r.history.size(), 25u);
  EXPECT_EQ(r.evaluations, 25 * 8);
  for (std::size_t g = 1; g < r.history.size(); ++g) EXPECT_GE(r.history[g], r.history[g - 1]);
  EXPECT_EQ(r.history.back(), r.best_fitness);
}

TEST(De, TrialsStayInBounds) {
  for (bool literal : {false, true}) {
    DeConfig cfg;
    cfg.population = 10;
    cfg.iterations = 30;
    cfg.paper_literal_mutation = literal;
    std::mutex m;
    bool inside = true;
    auto f = [&](std::span<const double> x) {
      std::lock_guard lock(m);
      for (double v : x) inside = inside && v >= 0.001 && v <= 1.0;
      return neg_sphere(x);
    };
    Rng rng = make_rng(5);
    de_optimize(f, box(4, 0.001, 1.0), cfg, rng);
    EXPECT_TRUE(inside) << "literal=" << literal;
  }
}

TEST(De, IdenticalPopulationStaysPut) {
  DeConfig cfg;
  cfg.population = 6;
  cfg.iterations = 10;
  std::vector<double> x0{0.7, -0.2};
  Rng rng = make_rng(6);
  DeResult r = de_optimize(neg_sphere, box(2, -1, 1), cfg, rng, std::vector<std::vector<double>>(6, x0));
  EXPECT_EQ(r.best, x0);
  for (double h : r.history) EXPECT_EQ(h, neg_sphere(x0));
}

TEST(De, WorkerInvariantAndSeeded) {
  DeConfig cfg;
  cfg.population = 8;
  cfg.iterations = 20;
  auto run = [&](int workers) {
    cfg.workers = workers;
    Rng rng = make_rng(7);
    return de_optimize(neg_sphere, box(3, -2, 2), cfg, rng);
  };
  DeResult a = run(1), b = run(3);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.history, b.history);
}

TEST(De, RejectsBadConfig) {
  DeConfig cfg;
  cfg.population = 3;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.f_min = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Sequence, BaseSequenceMatchesBasePolicy) {
  auto prob = std::make_shared<const ReservoirProblem>(case2_problem(Grid(9, 9, 1200.0, 1200.0, 0.2)));
  EXPECT_EQ(sequence_length(*prob), 20);
  Bounds b = sequence_bounds(*prob);
  EXPECT_EQ(b.lower, std::vector<double>(20, 0.001));
  EXPECT_EQ(b.upper, std::vector<double>(20, 1.0));
  EXPECT_EQ(base_sequence(*prob), std::vector<double>(20, 1.0));
  Rng rng = make_rng(1);
  auto m = make_flow_model(*prob, sample_conditional_gaussian(rng, prob->grid, prob->wells, {}));
  EXPECT_EQ(sequence_fitness(base_sequence(*prob), prob, m), episode_return(base_policy(4), prob, m, EnvConfig{}));
}

TEST(Sequence, BenchmarkNeverWorseThanBase) {
  auto prob = std::make_shared<const ReservoirProblem>(case2_problem(Grid(9, 9, 1200.0, 1200.0, 0.2)));
  std::vector<PermField> fields;
  for (std::uint64_t i = 0; i < 2; ++i) {
    Rng rng = make_rng(3, {i});
    fields.push_back(sample_conditional_gaussian(rng, prob->grid, prob->wells, {}));
  }
  DeConfig cfg;
  cfg.population = 6;
  cfg.iterations = 4;
  DeBenchmark r = de_benchmark(prob, make_pool(*prob, fields), cfg);
  ASSERT_EQ(r.best_returns.size(), 2u);
  for (int i = 0; i < 2; ++i) EXPECT_GE(r.best_returns[i], r.base_returns[i]);
  EXPECT_EQ(r.evaluations, 2 * 4 * 6);
}
