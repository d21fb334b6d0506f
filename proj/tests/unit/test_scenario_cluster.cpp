#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "wellrl/scenario_cluster.hpp"

using namespace wellrl;

namespace {

std::shared_ptr<const ReservoirProblem> tiny_problem() {
  return std::make_shared<const ReservoirProblem>(case2_problem(Grid(9, 9, 1200.0, 1200.0, 0.2)));
}

std::vector<PermField> draw(const ReservoirProblem& p, int n, std::uint64_t seed) {
  std::vector<PermField> out;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
    out.push_back(sample_conditional_gaussian(rng, p.grid, p.wells, {}));
  }
  return out;
}

// End-of-control-step saturations under equal weights, driven straight through the simulator.
std::vector<double> naive_trajectory(const ReservoirProblem& p, const PermField& f) {
  FlowModel model(p.grid, f, p.viscosity);
  ReservoirState st{std::vector<double>(p.grid.cell_count(), p.initial_saturation), {}};
  const std::vector<double> rates = weights_to_rates(std::vector<double>(p.wells.well_count(), 1.0), p.wells);
  std::vector<double> out;
  for (int s = 0; s < p.control_steps; ++s) {
    simulate_control_step(model, p.wells, st, rates, p.control_dt(), p.substeps);
    out.insert(out.end(), st.saturation.begin(), st.saturation.end());
  }
  return out;
}

Eigen::MatrixXd pairwise(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  return d;
}

}  // namespace

TEST(Distance, MatchesNaiveRecomputation) {
  auto prob = tiny_problem();
  auto fields = draw(*prob, 4, 21);
  Eigen::MatrixXd d = connectivity_distance_matrix(prob, fields, {}, 2);
  std::vector<std::vector<double>> tr;
  for (const auto& f : fields) tr.push_back(naive_trajectory(*prob, f));
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(d(i, i), 0.0);
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < tr[i].size(); ++k) s += (tr[i][k] - tr[j][k]) * (tr[i][k] - tr[j][k]);
      EXPECT_NEAR(d(i, j), s * prob->control_dt(), 1e-12 * std::max(1.0, s));
      EXPECT_EQ(d(i, j), d(j, i));
    }
  }
}

TEST(Distance, ProbeSetsAndSnapshotCount) {
  auto prob = tiny_problem();
  auto fields = draw(*prob, 1, 3);
  EXPECT_EQ(probe_cells(*prob, ProbeSet::kWells).size(), 5u);
  EXPECT_EQ(probe_cells(*prob, ProbeSet::kAllCells).size(), 81u);
  auto m = make_flow_model(*prob, fields[0]);
  EXPECT_EQ(base_trajectory(prob, m, {ProbeSet::kAllCells, 1}).size(), 5u * 81u);
  EXPECT_EQ(base_trajectory(prob, m, {ProbeSet::kWells, 5}).size(), 25u * 5u);
  // With one snapshot per step the last block is the end-of-episode state.
  const auto t = base_trajectory(prob, m, {ProbeSet::kAllCells, 1});
  const auto ref = naive_trajectory(*prob, fields[0]);
  for (std::size_t k = 0; k < t.size(); ++k) ASSERT_NEAR(t[k], ref[k], 1e-14);
  EXPECT_THROW(base_trajectory(prob, m, {ProbeSet::kWells, 3}), std::invalid_argument);
  EXPECT_THROW(connectivity_distance_matrix(prob, std::vector<PermField>{PermField{{1.0}}}, {}), std::invalid_argument);
}

TEST(Mds, RecoversPlantedConfiguration) {
  Eigen::MatrixXd x(6, 2);
  x << 0, 0, 3, 0, 0, 1, 5, 2, -2, 4, 1, -3;
  Eigen::MatrixXd c = classical_mds(pairwise(x), 2);
  EXPECT_TRUE(pairwise(c).isApprox(pairwise(x), 1e-9));
  EXPECT_NEAR(c.colwise().sum().norm(), 0.0, 1e-9);
  for (int k = 0; k < 2; ++k) {
    Eigen::Index arg;
    c.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(c(arg, k), 0.0);
  }
}

TEST(KMeans, SeparatedBlobs) {
  Rng gen = make_rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  Eigen::MatrixXd x(30, 2);
  const double cx[3] = {0, 10, 0}, cy[3] = {0, 0, 10};
  for (int i = 0; i < 30; ++i) x.row(i) << cx[i % 3] + n(gen), cy[i % 3] + n(gen);
  Rng rng = make_rng(2);
  KMeansResult r = kmeans(x, 3, rng);
  for (int i = 3; i < 30; ++i) EXPECT_EQ(r.labels[i], r.labels[i % 3]);
  EXPECT_EQ(std::set<int>(r.labels.begin(), r.labels.end()).size(), 3u);
  for (std::size_t t = 1; t < r.inertia_trace.size(); ++t) EXPECT_LE(r.inertia_trace[t], r.inertia_trace[t - 1] + 1e-12);
  EXPECT_NEAR(r.inertia, r.inertia_trace.back(), 1e-12);
}

TEST(KMeans, CornersAndSingleCluster) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 1, 1;
  Rng rng = make_rng(3);
  KMeansResult r = kmeans(x, 4, rng);
  EXPECT_EQ(r.inertia, 0.0);
  EXPECT_EQ(std::set<int>(r.labels.begin(), r.labels.end()).size(), 4u);
  KMeansResult one = kmeans(x, 1, rng);
  EXPECT_NEAR(one.centers(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(one.centers(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(one.inertia, 2.0, 1e-12);
  EXPECT_THROW(kmeans(x, 5, rng), std::invalid_argument);
}

TEST(Selection, ClosestForTrainingOtherMemberForEvaluation) {
  Eigen::MatrixXd x(6, 1);
  x << 0.0, 0.2, 1.0, 10.0, 10.4, 11.0;
  Eigen::MatrixXd c(2, 1);
  c << 0.4, 10.5;
  Rng rng = make_rng(4);
  Selection s = select_vectors(x, {0, 0, 0, 1, 1, 1}, c, rng);
  EXPECT_EQ(s.training, (std::vector<int>{1, 4}));
  EXPECT_TRUE(s.evaluation[0] == 0 || s.evaluation[0] == 2);
  EXPECT_TRUE(s.evaluation[1] == 3 || s.evaluation[1] == 5);
  EXPECT_TRUE(s.warnings.empty());
}

TEST(Selection, SingletonBorrowsFromNearestCluster) {
  Eigen::MatrixXd x(7, 1);
  x << 0.0, 5.0, 5.1, 5.2, 20.0, 20.1, 20.2;
  Eigen::MatrixXd c(3, 1);
  c << 0.0, 5.1, 20.1;
  Rng rng = make_rng(5);
  Selection s = select_vectors(x, {0, 1, 1, 1, 2, 2, 2}, c, rng);
  ASSERT_EQ(s.warnings.size(), 1u);
  // Cluster 1 is nearest to cluster 0 and still has a spare member.
  EXPECT_TRUE(s.evaluation[0] == 1 || s.evaluation[0] == 3);
  EXPECT_EQ(s.training, (std::vector<int>{0, 2, 5}));
  std::set<int> all(s.training.begin(), s.training.end());
  all.insert(s.evaluation.begin(), s.evaluation.end());
  EXPECT_EQ(all.size(), 6u);
}

TEST(Selection, AllSingletonsReuseTrainingIds) {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  Rng rng = make_rng(6);
  Selection s = select_vectors(x, {0, 1}, x, rng);
  EXPECT_EQ(s.warnings.size(), 2u);
  EXPECT_EQ(s.evaluation, (std::vector<int>{1, 0}));
}

TEST(ScenarioSet, DeterministicAcrossWorkers) {
  auto prob = tiny_problem();
  auto fields = draw(*prob, 12, 8);
  ScenarioSet a = build_scenario_set(prob, fields, 3, {}, 9, 1);
  ScenarioSet b = build_scenario_set(prob, fields, 3, {}, 9, 2);
  EXPECT_EQ(a.dist, b.dist);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.training, b.training);
  EXPECT_EQ(a.evaluation, b.evaluation);
  EXPECT_EQ(a.training.size(), 3u);
}
