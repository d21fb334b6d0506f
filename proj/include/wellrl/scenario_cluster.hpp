#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wellrl/perm_fields.hpp"
#include "wellrl/random.hpp"
#include "wellrl/well_env.hpp"

namespace wellrl {

enum class ProbeSet { kAllCells, kWells };

struct ProbeConfig {
  ProbeSet probes = ProbeSet::kAllCells;
  /// Snapshots recorded per control step; must divide the substep count.
  int snapshots_per_step = 1;
};

std::vector<int> probe_cells(const ReservoirProblem& problem, ProbeSet probes);

/// Probe saturations under the base policy, one block of probe values per snapshot.
/// The initial state is identical for every realisation and is not stored.
std::vector<double> base_trajectory(std::shared_ptr<const ReservoirProblem> problem,
                                    std::shared_ptr<const FlowModel> model, const ProbeConfig& probe);

/// Rectangle rule: sum of squared differences times the snapshot spacing.
double trajectory_distance(std::span<const double> a, std::span<const double> b, double dt);

/// D[i,j] over all realisations. Trajectories run in parallel; assembly is serial.
Eigen::MatrixXd connectivity_distance_matrix(std::shared_ptr<const ReservoirProblem> problem,
                                             std::span<const PermField> samples, const ProbeConfig& probe,
                                             int workers = 1);

/// Classical MDS on squared distances. Each axis is oriented so its largest-magnitude
/// entry is positive.
Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& dist, int dim = 2);

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;  // l x d
  double inertia = 0.0;
  int iterations = 0;
  /// Objective after every Lloyd iteration of the kept restart.
  std::vector<double> inertia_trace;
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` runs.
KMeansResult kmeans(const Eigen::MatrixXd& coords, int clusters, Rng& rng, int max_iter = 300, int restarts = 8);

struct Selection {
  std::vector<int> training;
  std::vector<int> evaluation;
  std::vector<std::string> warnings;
};

/// Training id per cluster: member closest to its centre. Evaluation id: uniform draw
/// among the other members; singleton clusters borrow from the nearest cluster.
Selection select_vectors(const Eigen::MatrixXd& coords, const std::vector<int>& labels,
                         const Eigen::MatrixXd& centers, Rng& rng);

struct ScenarioSet {
  Eigen::MatrixXd dist;
  Eigen::MatrixXd coords;
  std::vector<int> labels;
  Eigen::MatrixXd centers;
  double inertia = 0.0;
  std::vector<int> training;
  std::vector<int> evaluation;
  std::vector<std::string> warnings;
};

ScenarioSet build_scenario_set(std::shared_ptr<const ReservoirProblem> problem, std::span<const PermField> samples,
                               int clusters, const ProbeConfig& probe, std::uint64_t seed, int workers = 1);

}  // namespace wellrl
