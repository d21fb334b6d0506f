#pragma once

#include <Eigen/Sparse>

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "wellrl/grid.hpp"
#include "wellrl/perm_fields.hpp"

namespace wellrl {

// Face layout:
//   x-faces: (nx+1) * ny, index j*(nx+1) + i, the face between cells (i-1, j) and (i, j).
//   y-faces: nx * (ny+1), index j*nx + i, the face between cells (i, j-1) and (i, j).
// Boundary faces (i = 0, i = nx, j = 0, j = ny) are no-flow. Positive flux points
// towards increasing i (x-faces) or increasing j (y-faces).

struct Transmissibilities {
  std::vector<double> x;
  std::vector<double> y;
};

/// Harmonic mean of adjacent mobilities k/mu times dy/dx (x-faces) or dx/dy (y-faces).
Transmissibilities assemble_transmissibilities(const Grid& grid, std::span<const double> perm,
                                               double viscosity);

/// Pressure stored relative to the pinned cell 0, plus an additive gauge. Fluxes
/// only ever read the relative part, so changing the gauge cannot perturb them.
class PressureField {
 public:
  PressureField() = default;
  explicit PressureField(std::vector<double> relative, double gauge = 0.0)
      : relative_(std::move(relative)), gauge_(gauge) {}

  double operator[](std::size_t k) const { return relative_[k] + gauge_; }
  std::size_t size() const { return relative_.size(); }
  const std::vector<double>& relative() const { return relative_; }
  double gauge() const { return gauge_; }
  PressureField with_gauge(double gauge) const { return PressureField(relative_, gauge); }
  std::vector<double> values() const;

 private:
  std::vector<double> relative_;
  double gauge_ = 0.0;
};

struct FaceFluxes {
  std::vector<double> x;
  std::vector<double> y;
};

enum class PressureSolverKind { kDirect, kConjugateGradient };

/// Solves sum_faces T (p_c - p_n) = q_c with p_0 = 0. The matrix depends only on
/// the transmissibilities, so the direct variant factorises once and is reused for
/// every rate vector. The CG variant (diagonal preconditioner) falls back to a
/// dense solve on grids of up to 4096 cells when it fails to converge.
class PressureSolver {
 public:
  PressureSolver(const Grid& grid, const Transmissibilities& trans,
                 PressureSolverKind kind = PressureSolverKind::kDirect, double cg_tolerance = 1e-12);

  /// cell_rates must sum to zero (relative to their magnitude); throws
  /// std::invalid_argument otherwise, NumericalError on solver failure.
  PressureField solve(std::span<const double> cell_rates) const;

  PressureSolverKind kind() const { return kind_; }

 private:
  using Ldlt = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

  int cells_;
  PressureSolverKind kind_;
  double cg_tolerance_;
  Eigen::SparseMatrix<double> reduced_;  // rows/cols 1..n-1 of the full operator
  std::shared_ptr<const Ldlt> ldlt_;
};

FaceFluxes darcy_fluxes(const Grid& grid, const Transmissibilities& trans,
                        const PressureField& pressure);

/// Net outgoing face flux per cell; equals the source rate for a consistent field.
std::vector<double> flux_divergence(const Grid& grid, const FaceFluxes& fluxes);

/// Scatters per-well rates (producers then injectors) onto cells.
std::vector<double> cell_sources(const Grid& grid, const WellSet& wells,
                                 std::span<const double> well_rates);

/// Implicit upwind transport operator for a fixed flux field:
///   phi V (s_new - s_old)/dt + sum_out F s_new - sum_in F s_up - q+ + |q-| s_new = 0.
/// The flux graph of a potential flow is acyclic, so cells are processed in
/// upstream-first order and each substep is one exact forward sweep. Circulating
/// fluxes (not produced by darcy_fluxes) fall back to a sparse LU solve.
class TransportOperator {
 public:
  TransportOperator(const Grid& grid, const FaceFluxes& fluxes, std::span<const double> cell_rates);

  void advance(std::vector<double>& saturation, double dt) const;

  /// Tracer leaving through producers at the given saturation, per unit time.
  double produced_tracer_rate(std::span<const double> saturation) const;
  double injection_rate() const { return injection_total_; }
  double production_rate() const { return production_total_; }

 private:
  int cells_;
  double pore_per_cell_;
  std::vector<int> order_;
  std::vector<double> outflow_;
  std::vector<double> injection_;
  std::vector<double> production_;
  std::vector<int> in_begin_;
  std::vector<int> in_cell_;
  std::vector<double> in_flux_;
  double injection_total_ = 0.0;
  double production_total_ = 0.0;
  bool acyclic_ = true;
};

std::vector<double> advance_saturation(std::span<const double> saturation, const FaceFluxes& fluxes,
                                       std::span<const double> cell_rates, double dt_sub,
                                       const Grid& grid);

/// Everything about a reservoir realisation that stays fixed across control steps.
class FlowModel {
 public:
  FlowModel(const Grid& grid, const PermField& field, double viscosity,
            PressureSolverKind kind = PressureSolverKind::kDirect);

  const Grid& grid() const { return grid_; }
  const Transmissibilities& transmissibilities() const { return trans_; }
  const PressureSolver& pressure_solver() const { return solver_; }
  const PermField& field() const { return field_; }

 private:
  Grid grid_;
  PermField field_;
  Transmissibilities trans_;
  PressureSolver solver_;
};

struct ReservoirState {
  std::vector<double> saturation;
  PressureField pressure;
};

struct ControlStepResult {
  double oil_produced = 0.0;
  double tracer_injected = 0.0;
  double tracer_produced = 0.0;
};

/// Called after every substep with the substep index (1-based) and saturation.
using SubstepObserver = std::function<void(int, std::span<const double>)>;

/// One control interval with constant well rates: a single pressure solve, then
/// n_sub implicit substeps. Oil production is accumulated per substep with the
/// end-of-substep producer saturations.
ControlStepResult simulate_control_step(const FlowModel& model, const WellSet& wells,
                                        ReservoirState& state, std::span<const double> well_rates,
                                        double dt_control, int n_sub,
                                        const SubstepObserver& observer = {});

/// Grid-shaped CSV (ny rows of nx values) for visual inspection.
void write_grid_csv(const std::filesystem::path& path, const Grid& grid,
                    std::span<const double> values);

}  // namespace wellrl
