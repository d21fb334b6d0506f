#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numeric>

#include "wellrl/flow_sim.hpp"
#include "wellrl/well_env.hpp"

using namespace wellrl;

namespace {

double harmonic(double a, double b) { return 2.0 / (1.0 / a + 1.0 / b); }

// Dense reference: assemble the full Laplacian from scratch, pin cell 0, solve.
Eigen::VectorXd dense_pressure(const Grid& g, const std::vector<double>& perm, double mu,
                               const std::vector<double>& q) {
  const int n = g.cell_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  auto couple = [&](int c, int m, double t) {
    a(c, c) += t;
    a(m, m) += t;
    a(c, m) -= t;
    a(m, c) -= t;
  };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const int c = g.flat(i, j);
      if (i + 1 < g.nx())
        couple(c, g.flat(i + 1, j), harmonic(perm[c] / mu, perm[g.flat(i + 1, j)] / mu) * g.dy() / g.dx());
      if (j + 1 < g.ny())
        couple(c, g.flat(i, j + 1), harmonic(perm[c] / mu, perm[g.flat(i, j + 1)] / mu) * g.dx() / g.dy());
    }
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(q.data(), n);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  p.tail(n - 1) = a.bottomRightCorner(n - 1, n - 1).fullPivLu().solve(rhs.tail(n - 1));
  return p;
}

// Strip of nx x 2 cells with uniform perm, injection split over the left column
// and production over the right column.
struct Strip {
  Grid grid;
  std::vector<double> perm;
  std::vector<double> q;
  Strip(int nx, double rate) : grid(nx, 2, 10.0 * nx, 20.0, 0.25), perm(grid.cell_count(), 3.0),
                               q(grid.cell_count(), 0.0) {
    for (int j = 0; j < 2; ++j) {
      q[grid.flat(0, j)] = rate / 2;
      q[grid.flat(nx - 1, j)] = -rate / 2;
    }
  }
};

}  // namespace

TEST(Transmissibility, HarmonicMean) {
  Grid g(2, 2, 4.0, 2.0, 0.2);
  std::vector<double> k{1.0, 3.0, 2.0, 2.0};
  Transmissibilities t = assemble_transmissibilities(g, k, 0.5);
  ASSERT_EQ(t.x.size(), 6u);
  ASSERT_EQ(t.y.size(), 6u);
  // Interior x-face of row 0 sits at index 1; boundaries carry nothing.
  EXPECT_NEAR(t.x[1], harmonic(2.0, 6.0) * g.dy() / g.dx(), 1e-14);
  EXPECT_EQ(t.x[0], 0.0);
  EXPECT_EQ(t.x[2], 0.0);
  EXPECT_NEAR(t.y[2], harmonic(2.0, 4.0) * g.dx() / g.dy(), 1e-14);
}

TEST(Pressure, StripMatchesAnalyticProfile) {
  const double rate = 7.0, mu = 0.3;
  Strip s(12, rate);
  Transmissibilities t = assemble_transmissibilities(s.grid, s.perm, mu);
  PressureSolver solver(s.grid, t);
  PressureField p = solver.solve(s.q);
  // Each row carries rate/2 through every x-face: drop per face = (rate/2) / T.
  const double drop = (rate / 2) / ((3.0 / mu) * s.grid.dy() / s.grid.dx());
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 12; ++i) EXPECT_NEAR(p[s.grid.flat(i, j)], -drop * i, 1e-10);
  FaceFluxes f = darcy_fluxes(s.grid, t, p);
  for (int i = 1; i < 12; ++i) EXPECT_NEAR(f.x[i], rate / 2, 1e-10);
  for (double fy : f.y) EXPECT_NEAR(fy, 0.0, 1e-10);
}

TEST(Pressure, DenseOracle3x3) {
  Grid g(3, 3, 30.0, 45.0, 0.2);
  std::vector<double> k{1.0, 5.0, 0.2, 2.0, 0.7, 9.0, 3.0, 1.5, 0.4};
  std::vector<double> q{4.0, 0, 0, 0, -1.5, 0, 0, 0, -2.5};
  Transmissibilities t = assemble_transmissibilities(g, k, 0.3);
  const Eigen::VectorXd ref = dense_pressure(g, k, 0.3, q);
  for (auto kind : {PressureSolverKind::kDirect, PressureSolverKind::kConjugateGradient}) {
    PressureField p = PressureSolver(g, t, kind).solve(q);
    for (int c = 0; c < 9; ++c) EXPECT_NEAR(p[c], ref[c], 1e-10);
  }
}

TEST(Pressure, GaugeDoesNotMoveFluxes) {
  Grid g(3, 3, 30.0, 30.0, 0.2);
  std::vector<double> k{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<double> q{1, 0, 0, 0, 0, 0, 0, 0, -1};
  Transmissibilities t = assemble_transmissibilities(g, k, 1.0);
  PressureField p = PressureSolver(g, t).solve(q);
  FaceFluxes a = darcy_fluxes(g, t, p), b = darcy_fluxes(g, t, p.with_gauge(1e6));
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  std::vector<double> div = flux_divergence(g, a);
  for (int c = 0; c < 9; ++c) EXPECT_NEAR(div[c], q[c], 1e-12);
}

TEST(Pressure, RejectsUnbalancedRates) {
  Grid g(3, 3, 30.0, 30.0, 0.2);
  std::vector<double> k(9, 1.0), q(9, 0.0);
  q[0] = 1.0;
  PressureSolver s(g, assemble_transmissibilities(g, k, 1.0));
  EXPECT_THROW(s.solve(q), std::invalid_argument);
}

TEST(Transport, StripOneStepOracle) {
  const double rate = 6.0, dt = 0.8;
  Strip s(8, rate);
  Transmissibilities t = assemble_transmissibilities(s.grid, s.perm, 1.0);
  FaceFluxes f = darcy_fluxes(s.grid, t, PressureSolver(s.grid, t).solve(s.q));
  std::vector<double> sat = advance_saturation(std::vector<double>(16, 0.0), f, s.q, dt, s.grid);
  // Implicit upwind from a clean reservoir: s_i = a s_{i-1} / (1 + a), with s_{-1} = 1.
  const double a = (rate / 2) * dt / (s.grid.porosity() * s.grid.cell_area());
  double up = 1.0;
  for (int i = 0; i < 8; ++i) {
    const double expect = a * up / (1 + a);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(sat[s.grid.flat(i, j)], expect, 1e-13);
    up = expect;
  }
}

TEST(Transport, ControlStepConservesTracerAndFluid) {
  Grid g(9, 9, 900.0, 900.0, 0.2);
  Rng rng = make_rng(4);
  ReservoirProblem prob = case2_problem(g);
  PermField field = sample_conditional_gaussian(rng, g, prob.wells, {});
  FlowModel model(g, field, prob.viscosity);
  ReservoirState st{std::vector<double>(g.cell_count(), 0.0), {}};
  std::vector<double> w{0.2, 1.0, 0.6, 0.05, 1.0};
  std::vector<double> rates = weights_to_rates(w, prob.wells);
  int calls = 0, last = 0;
  for (int step = 0; step < 3; ++step) {
    const double before = std::accumulate(st.saturation.begin(), st.saturation.end(), 0.0);
    ControlStepResult r = simulate_control_step(model, prob.wells, st, rates, 5.0, 10,
                                                [&](int k, std::span<const double>) { ++calls; last = k; });
    const double after = std::accumulate(st.saturation.begin(), st.saturation.end(), 0.0);
    const double stored = (after - before) * g.porosity() * g.cell_area();
    EXPECT_NEAR(r.tracer_injected - r.tracer_produced, stored, 1e-9 * r.tracer_injected);
    EXPECT_NEAR(r.tracer_injected, prob.wells.total_rate() * 5.0, 1e-9);
    EXPECT_NEAR(r.oil_produced + r.tracer_produced, prob.wells.total_rate() * 5.0, 1e-8);
    for (double s : st.saturation) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
  EXPECT_EQ(calls, 30);
  EXPECT_EQ(last, 10);
}
