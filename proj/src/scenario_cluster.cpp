#include "wellrl/scenario_cluster.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "wellrl/parallel.hpp"

namespace wellrl {

std::vector<int> probe_cells(const ReservoirProblem& problem, ProbeSet probes) {
  std::vector<int> cells;
  if (probes == ProbeSet::kAllCells) {
    cells.resize(static_cast<std::size_t>(problem.grid.cell_count()));
    std::iota(cells.begin(), cells.end(), 0);
  } else {
    for (int w = 0; w < problem.wells.well_count(); ++w) cells.push_back(problem.wells.cell_of(w));
  }
  return cells;
}

std::vector<double> base_trajectory(std::shared_ptr<const ReservoirProblem> problem,
                                    std::shared_ptr<const FlowModel> model, const ProbeConfig& probe) {
  const int per_step = probe.snapshots_per_step;
  if (per_step < 1 || problem->substeps % per_step != 0)
    throw std::invalid_argument("snapshots_per_step must divide the substep count");
  const int stride = problem->substeps / per_step;
  const std::vector<int> cells = probe_cells(*problem, probe.probes);
  std::vector<double> out;
  out.reserve(cells.size() * static_cast<std::size_t>(problem->control_steps * per_step));

  WellEnv env(problem, ScenarioPool{std::move(model)}, EnvConfig{}, 0);
  env.reset_to(0);
  env.set_substep_observer([&](int k, std::span<const double> s) {
    if (k % stride != 0) return;
    for (int c : cells) out.push_back(s[static_cast<std::size_t>(c)]);
  });
  const std::vector<double> action = env.codec().base_action();
  while (!env.done()) env.step(action);
  return out;
}

double trajectory_distance(std::span<const double> a, std::span<const double> b, double dt) {
  if (a.size() != b.size()) throw std::invalid_argument("trajectories differ in length");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sum += d * d;
  }
  return sum * dt;
}

Eigen::MatrixXd connectivity_distance_matrix(std::shared_ptr<const ReservoirProblem> problem,
                                             std::span<const PermField> samples, const ProbeConfig& probe,
                                             int workers) {
  const auto n = samples.size();
  for (const auto& f : samples) {
    if (f.log_perm.size() != static_cast<std::size_t>(problem->grid.cell_count()))
      throw std::invalid_argument("permeability sample does not match the grid");
  }
  std::vector<std::vector<double>> traj(n);
  parallel_for(n, workers, [&](std::size_t i) {
    traj[i] = base_trajectory(problem, make_flow_model(*problem, samples[i]), probe);
  });
  const double dt = problem->control_dt() / probe.snapshots_per_step;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = trajectory_distance(traj[i], traj[j], dt);
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return d;
}

Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& dist, int dim) {
  const Eigen::Index n = dist.rows();
  if (dist.cols() != n) throw std::invalid_argument("distance matrix must be square");
  if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, dim);
  if (n == 0) return coords;
  const Eigen::MatrixXd d2 = dist.array().square().matrix();
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  Eigen::MatrixXd b = -0.5 * j * d2 * j;
  b = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  const Eigen::VectorXd& vals = es.eigenvalues();  // ascending
  for (int k = 0; k < dim && k < n; ++k) {
    const Eigen::Index col = n - 1 - k;
    const double lambda = std::max(vals[col], 0.0);
    Eigen::VectorXd v = es.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    coords.col(k) = v * std::sqrt(lambda);
  }
  return coords;
}

namespace {

double sq_dist(const Eigen::MatrixXd& x, Eigen::Index i, const Eigen::MatrixXd& c, Eigen::Index k) {
  return (x.row(i) - c.row(k)).squaredNorm();
}

Eigen::MatrixXd plus_plus_seed(const Eigen::MatrixXd& x, int l, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(l, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int k = 1; k < l; ++k) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(x, i, centers, k - 1));
      total += best[i];
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double u = uniform(rng, 0.0, total);
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += best[i];
        if (u < acc && best[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    }
    centers.row(k) = x.row(pick);
  }
  return centers;
}

double inertia_of(const Eigen::MatrixXd& x, const std::vector<int>& labels, const Eigen::MatrixXd& c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s += sq_dist(x, i, c, labels[i]);
  return s;
}

KMeansResult lloyd(const Eigen::MatrixXd& x, int l, Rng& rng, int max_iter) {
  const Eigen::Index n = x.rows();
  KMeansResult r;
  r.centers = plus_plus_seed(x, l, rng);
  r.labels.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = r.labels[i] >= 0 ? r.labels[i] : 0;
      double bd = sq_dist(x, i, r.centers, best);
      for (int k = 0; k < l; ++k) {
        const double d = sq_dist(x, i, r.centers, k);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (best != r.labels[i]) changed = true;
      r.labels[i] = best;
    }
    // Empty clusters take the point farthest from its centre among clusters with spare members.
    std::vector<int> counts(static_cast<std::size_t>(l), 0);
    for (int lab : r.labels) ++counts[lab];
    for (int k = 0; k < l; ++k) {
      if (counts[k] > 0) continue;
      Eigen::Index far = -1;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[r.labels[i]] < 2) continue;
        const double d = sq_dist(x, i, r.centers, r.labels[i]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      if (far < 0) break;
      --counts[r.labels[far]];
      r.labels[far] = k;
      counts[k] = 1;
      changed = true;
    }
    if (!changed && it > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(l, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(r.labels[i]) += x.row(i);
    for (int k = 0; k < l; ++k) {
      if (counts[k] > 0) r.centers.row(k) = sums.row(k) / counts[k];
    }
    r.iterations = it + 1;
    r.inertia_trace.push_back(inertia_of(x, r.labels, r.centers));
  }
  r.inertia = inertia_of(x, r.labels, r.centers);
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& coords, int clusters, Rng& rng, int max_iter, int restarts) {
  if (clusters < 1) throw std::invalid_argument("k-means needs at least one cluster");
  if (coords.rows() < clusters) throw std::invalid_argument("k-means needs at least as many points as clusters");
  if (max_iter < 1 || restarts < 1) throw std::invalid_argument("max_iter and restarts must be positive");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult cur = lloyd(coords, clusters, rng, max_iter);
    if (r == 0 || cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

Selection select_vectors(const Eigen::MatrixXd& coords, const std::vector<int>& labels,
                         const Eigen::MatrixXd& centers, Rng& rng) {
  const int l = static_cast<int>(centers.rows());
  std::vector<std::vector<int>> members(static_cast<std::size_t>(l));
  for (std::size_t i = 0; i < labels.size(); ++i) members.at(static_cast<std::size_t>(labels[i])).push_back(static_cast<int>(i));
  Selection s;
  for (int k = 0; k < l; ++k) {
    if (members[k].empty()) throw std::invalid_argument("cluster " + std::to_string(k) + " is empty");
    int best = members[k].front();
    double bd = std::numeric_limits<double>::infinity();
    for (int i : members[k]) {
      const double d = (coords.row(i) - centers.row(k)).squaredNorm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    s.training.push_back(best);
  }
  std::vector<char> used(labels.size(), 0);
  for (int t : s.training) used[t] = 1;
  auto candidates = [&](int k) {
    std::vector<int> c;
    for (int i : members[k])
      if (!used[i]) c.push_back(i);
    return c;
  };
  for (int k = 0; k < l; ++k) {
    std::vector<int> cand = candidates(k);
    if (cand.empty()) {
      std::vector<int> order;
      for (int m = 0; m < l; ++m)
        if (m != k) order.push_back(m);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return (centers.row(a) - centers.row(k)).squaredNorm() < (centers.row(b) - centers.row(k)).squaredNorm();
      });
      int donor = -1;
      for (int m : order) {
        cand = candidates(m);
        if (!cand.empty()) {
          donor = m;
          break;
        }
      }
      if (donor >= 0) {
        s.warnings.push_back("cluster " + std::to_string(k) + " has no spare member; evaluation sample taken from cluster " +
                             std::to_string(donor));
      } else {
        const int fallback = order.empty() ? s.training[k] : s.training[order.front()];
        s.warnings.push_back("cluster " + std::to_string(k) +
                             " has no spare member and none remain elsewhere; evaluation reuses training sample " +
                             std::to_string(fallback));
        s.evaluation.push_back(fallback);
        continue;
      }
    }
    const int pick = cand[uniform_index(rng, cand.size())];
    used[pick] = 1;
    s.evaluation.push_back(pick);
  }
  return s;
}

ScenarioSet build_scenario_set(std::shared_ptr<const ReservoirProblem> problem, std::span<const PermField> samples,
                               int clusters, const ProbeConfig& probe, std::uint64_t seed, int workers) {
  ScenarioSet set;
  set.dist = connectivity_distance_matrix(problem, samples, probe, workers);
  set.coords = classical_mds(set.dist, 2);
  Rng km_rng = make_rng(seed, {0xC1});
  KMeansResult km = kmeans(set.coords, clusters, km_rng);
  set.labels = km.labels;
  set.centers = km.centers;
  set.inertia = km.inertia;
  Rng sel_rng = make_rng(seed, {0xC2});
  Selection sel = select_vectors(set.coords, set.labels, set.centers, sel_rng);
  set.training = std::move(sel.training);
  set.evaluation = std::move(sel.evaluation);
  set.warnings = std::move(sel.warnings);
  return set;
}

}  // namespace wellrl
