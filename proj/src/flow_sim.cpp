#include "wellrl/flow_sim.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wellrl/error.hpp"

namespace wellrl {

namespace {

double harmonic(double a, double b) { return (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b) : 0.0; }

// Visits every interior face as (upstream-side cell, downstream-side cell, face value).
template <typename Fn>
void for_each_interior_face(const Grid& g, std::span<const double> xs, std::span<const double> ys,
                            Fn&& fn) {
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) fn(g.flat(i - 1, j), g.flat(i, j), xs[j * (g.nx() + 1) + i]);
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) fn(g.flat(i, j - 1), g.flat(i, j), ys[j * g.nx() + i]);
}

}  // namespace

Transmissibilities assemble_transmissibilities(const Grid& g, std::span<const double> perm,
                                               double viscosity) {
  if (static_cast<int>(perm.size()) != g.cell_count())
    throw std::invalid_argument("permeability size does not match grid");
  if (!(viscosity > 0.0)) throw std::invalid_argument("viscosity must be positive");
  for (double k : perm)
    if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("permeability must be finite and >= 0");

  Transmissibilities t;
  t.x.assign(static_cast<std::size_t>(g.nx() + 1) * g.ny(), 0.0);
  t.y.assign(static_cast<std::size_t>(g.nx()) * (g.ny() + 1), 0.0);
  const double gx = g.dy() / g.dx();
  const double gy = g.dx() / g.dy();
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i)
      t.x[j * (g.nx() + 1) + i] =
          gx * harmonic(perm[g.flat(i - 1, j)] / viscosity, perm[g.flat(i, j)] / viscosity);
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      t.y[j * g.nx() + i] =
          gy * harmonic(perm[g.flat(i, j - 1)] / viscosity, perm[g.flat(i, j)] / viscosity);
  return t;
}

std::vector<double> PressureField::values() const {
  std::vector<double> v(relative_.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = relative_[k] + gauge_;
  return v;
}

PressureSolver::PressureSolver(const Grid& g, const Transmissibilities& trans,
                               PressureSolverKind kind, double cg_tolerance)
    : cells_(g.cell_count()), kind_(kind), cg_tolerance_(cg_tolerance) {
  const int n = cells_ - 1;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * cells_));
  for_each_interior_face(g, trans.x, trans.y, [&](int a, int b, double t) {
    if (t == 0.0) return;
    if (a > 0) trip.emplace_back(a - 1, a - 1, t);
    if (b > 0) trip.emplace_back(b - 1, b - 1, t);
    if (a > 0 && b > 0) {
      trip.emplace_back(a - 1, b - 1, -t);
      trip.emplace_back(b - 1, a - 1, -t);
    }
  });
  reduced_.resize(n, n);
  reduced_.setFromTriplets(trip.begin(), trip.end());
  reduced_.makeCompressed();
  if (kind_ == PressureSolverKind::kDirect) {
    auto ldlt = std::make_shared<Ldlt>();
    ldlt->compute(reduced_);
    if (ldlt->info() != Eigen::Success)
      throw NumericalError("pressure matrix factorisation failed (disconnected or degenerate grid?)");
    ldlt_ = std::move(ldlt);
  }
}

PressureField PressureSolver::solve(std::span<const double> q) const {
  if (static_cast<int>(q.size()) != cells_) throw std::invalid_argument("rate vector size mismatch");
  double sum = 0.0, scale = 0.0;
  for (double v : q) {
    sum += v;
    scale += std::abs(v);
  }
  if (std::abs(sum) > 1e-10 * std::max(scale, 1e-300))
    throw std::invalid_argument("source rates are not balanced (sum = " + std::to_string(sum) + ")");
  std::vector<double> p(cells_, 0.0);
  if (scale == 0.0) return PressureField(std::move(p));

  const int n = cells_ - 1;
  Eigen::Map<const Eigen::VectorXd> rhs(q.data() + 1, n);
  Eigen::VectorXd x;
  if (kind_ == PressureSolverKind::kDirect) {
    x = ldlt_->solve(rhs);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(cg_tolerance_);
    cg.setMaxIterations(std::max(1000, 10 * n));
    cg.compute(reduced_);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success) {
      if (cells_ > 4096) {
        std::ostringstream msg;
        msg << "pressure CG did not converge: " << cg.iterations() << " iterations, relative residual "
            << cg.error();
        throw NumericalError(msg.str());
      }
      x = Eigen::MatrixXd(reduced_).ldlt().solve(rhs);
    }
  }
  const Eigen::VectorXd residual = reduced_ * x - rhs;
  if (!x.allFinite() || residual.norm() > 1e-8 * rhs.norm()) {
    std::ostringstream msg;
    msg << "pressure solve inaccurate: relative residual " << residual.norm() / rhs.norm();
    throw NumericalError(msg.str());
  }
  for (int k = 0; k < n; ++k) p[k + 1] = x[k];
  return PressureField(std::move(p));
}

FaceFluxes darcy_fluxes(const Grid& g, const Transmissibilities& trans, const PressureField& pressure) {
  const auto& p = pressure.relative();
  if (static_cast<int>(p.size()) != g.cell_count())
    throw std::invalid_argument("pressure size does not match grid");
  FaceFluxes f;
  f.x.assign(trans.x.size(), 0.0);
  f.y.assign(trans.y.size(), 0.0);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) {
      const int face = j * (g.nx() + 1) + i;
      f.x[face] = trans.x[face] * (p[g.flat(i - 1, j)] - p[g.flat(i, j)]);
    }
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const int face = j * g.nx() + i;
      f.y[face] = trans.y[face] * (p[g.flat(i, j - 1)] - p[g.flat(i, j)]);
    }
  return f;
}

std::vector<double> flux_divergence(const Grid& g, const FaceFluxes& fluxes) {
  std::vector<double> div(g.cell_count(), 0.0);
  for_each_interior_face(g, fluxes.x, fluxes.y, [&](int a, int b, double f) {
    div[a] += f;
    div[b] -= f;
  });
  return div;
}

std::vector<double> cell_sources(const Grid& g, const WellSet& wells, std::span<const double> rates) {
  if (static_cast<int>(rates.size()) != wells.well_count())
    throw std::invalid_argument("well rate vector size mismatch");
  std::vector<double> q(g.cell_count(), 0.0);
  for (int w = 0; w < wells.well_count(); ++w) q[wells.cell_of(w)] += rates[w];
  return q;
}

TransportOperator::TransportOperator(const Grid& g, const FaceFluxes& fluxes,
                                     std::span<const double> q)
    : cells_(g.cell_count()), pore_per_cell_(g.porosity() * g.cell_area()) {
  if (static_cast<int>(q.size()) != cells_) throw std::invalid_argument("rate vector size mismatch");
  outflow_.assign(cells_, 0.0);
  injection_.assign(cells_, 0.0);
  production_.assign(cells_, 0.0);
  for (int c = 0; c < cells_; ++c) {
    injection_[c] = std::max(q[c], 0.0);
    production_[c] = std::max(-q[c], 0.0);
    outflow_[c] = production_[c];
    injection_total_ += injection_[c];
    production_total_ += production_[c];
  }

  struct Edge {
    int from, to;
    double flux;
  };
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(2 * cells_));
  for_each_interior_face(g, fluxes.x, fluxes.y, [&](int a, int b, double f) {
    if (f > 0.0) edges.push_back({a, b, f});
    else if (f < 0.0) edges.push_back({b, a, -f});
  });

  std::vector<int> indegree(cells_, 0), out_count(cells_, 0);
  in_begin_.assign(cells_ + 1, 0);
  for (const auto& e : edges) {
    outflow_[e.from] += e.flux;
    ++in_begin_[e.to + 1];
    ++indegree[e.to];
    ++out_count[e.from];
  }
  std::partial_sum(in_begin_.begin(), in_begin_.end(), in_begin_.begin());
  in_cell_.resize(edges.size());
  in_flux_.resize(edges.size());
  std::vector<int> out_begin(cells_ + 1, 0);
  for (int c = 0; c < cells_; ++c) out_begin[c + 1] = out_begin[c] + out_count[c];
  std::vector<int> out_cell(edges.size());
  {
    std::vector<int> in_fill(in_begin_.begin(), in_begin_.end() - 1);
    std::vector<int> out_fill(out_begin.begin(), out_begin.end() - 1);
    for (const auto& e : edges) {
      in_cell_[in_fill[e.to]] = e.from;
      in_flux_[in_fill[e.to]++] = e.flux;
      out_cell[out_fill[e.from]++] = e.to;
    }
  }

  // Kahn's algorithm over the upwind graph.
  order_.reserve(cells_);
  std::deque<int> ready;
  for (int c = 0; c < cells_; ++c)
    if (indegree[c] == 0) ready.push_back(c);
  while (!ready.empty()) {
    const int c = ready.front();
    ready.pop_front();
    order_.push_back(c);
    for (int e = out_begin[c]; e < out_begin[c + 1]; ++e)
      if (--indegree[out_cell[e]] == 0) ready.push_back(out_cell[e]);
  }
  acyclic_ = static_cast<int>(order_.size()) == cells_;
}

void TransportOperator::advance(std::vector<double>& s, double dt) const {
  if (static_cast<int>(s.size()) != cells_) throw std::invalid_argument("saturation size mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("substep length must be positive");
  const double storage = pore_per_cell_ / dt;
  if (acyclic_) {
    for (int c : order_) {
      double num = storage * s[c] + injection_[c];
      for (int e = in_begin_[c]; e < in_begin_[c + 1]; ++e) num += in_flux_[e] * s[in_cell_[e]];
      // The pressure residual can leave inflow a few ulps above outflow.
      s[c] = std::clamp(num / (storage + outflow_[c]), 0.0, 1.0);
    }
    return;
  }
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(cells_);
  for (int c = 0; c < cells_; ++c) {
    trip.emplace_back(c, c, storage + outflow_[c]);
    for (int e = in_begin_[c]; e < in_begin_[c + 1]; ++e) trip.emplace_back(c, in_cell_[e], -in_flux_[e]);
    rhs[c] = storage * s[c] + injection_[c];
  }
  Eigen::SparseMatrix<double> a(cells_, cells_);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw NumericalError("transport system factorisation failed");
  const Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw NumericalError("transport solve failed");
  for (int c = 0; c < cells_; ++c) s[c] = std::clamp(x[c], 0.0, 1.0);
}

double TransportOperator::produced_tracer_rate(std::span<const double> s) const {
  double r = 0.0;
  for (int c = 0; c < cells_; ++c)
    if (production_[c] > 0.0) r += production_[c] * s[c];
  return r;
}

std::vector<double> advance_saturation(std::span<const double> saturation, const FaceFluxes& fluxes,
                                       std::span<const double> cell_rates, double dt_sub,
                                       const Grid& grid) {
  std::vector<double> s(saturation.begin(), saturation.end());
  TransportOperator(grid, fluxes, cell_rates).advance(s, dt_sub);
  return s;
}

FlowModel::FlowModel(const Grid& grid, const PermField& field, double viscosity,
                     PressureSolverKind kind)
    : grid_(grid),
      field_(field),
      trans_(assemble_transmissibilities(grid, field.perm(), viscosity)),
      solver_(grid, trans_, kind) {}

ControlStepResult simulate_control_step(const FlowModel& model, const WellSet& wells,
                                        ReservoirState& state, std::span<const double> well_rates,
                                        double dt_control, int n_sub,
                                        const SubstepObserver& observer) {
  if (n_sub < 1) throw std::invalid_argument("need at least one substep");
  if (!(dt_control > 0.0)) throw std::invalid_argument("control step length must be positive");
  const Grid& g = model.grid();
  const std::vector<double> q = cell_sources(g, wells, well_rates);
  state.pressure = model.pressure_solver().solve(q);
  const FaceFluxes fluxes = darcy_fluxes(g, model.transmissibilities(), state.pressure);
  const TransportOperator transport(g, fluxes, q);

  ControlStepResult out;
  const double dt = dt_control / n_sub;
  for (int k = 1; k <= n_sub; ++k) {
    transport.advance(state.saturation, dt);
    const double tracer_rate = transport.produced_tracer_rate(state.saturation);
    out.tracer_produced += dt * tracer_rate;
    out.tracer_injected += dt * transport.injection_rate();
    out.oil_produced += dt * (transport.production_rate() - tracer_rate);
    if (observer) observer(k, state.saturation);
  }
  out.oil_produced = std::max(out.oil_produced, 0.0);
  return out;
}

void write_grid_csv(const std::filesystem::path& path, const Grid& grid, std::span<const double> values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) out << (i ? "," : "") << values[grid.flat(i, j)];
    out << '\n';
  }
}

}  // namespace wellrl
