#include "wellrl/perm_fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wellrl/error.hpp"

namespace wellrl {

double PermField::perm(std::size_t k) const { return std::exp(log_perm[k]); }

std::vector<double> PermField::perm() const {
  std::vector<double> k(log_perm.size());
  std::transform(log_perm.begin(), log_perm.end(), k.begin(), [](double g) { return std::exp(g); });
  return k;
}

PermField channel_field(const Grid& grid, const ChannelParams& p) {
  const double length = grid.lx();
  const double slope = (p.right_offset - p.left_offset) / length;
  PermField field;
  field.log_perm.resize(grid.cell_count());
  for (int k = 0; k < grid.cell_count(); ++k) {
    const Point c = grid.center(k);
    const double lower = slope * c.x + p.left_offset;
    const bool inside = lower <= c.y && c.y <= lower + p.width;
    field.log_perm[k] = inside ? p.g_high : p.g_low;
  }
  return field;
}

ChannelParams draw_channel_params(Rng& rng, const Grid& grid, const ChannelDistribution& dist) {
  if (!(dist.width_min <= dist.width_max) || dist.width_max > grid.lx())
    throw std::invalid_argument("channel width range must satisfy wmin <= wmax <= L");
  ChannelParams p;
  p.width = uniform(rng, dist.width_min, dist.width_max);
  p.left_offset = uniform(rng, 0.0, grid.lx() - p.width);
  p.right_offset = uniform(rng, 0.0, grid.lx() - p.width);
  p.g_high = dist.g_high;
  p.g_low = dist.g_low;
  return p;
}

PermField sample_channel(Rng& rng, const Grid& grid, const ChannelDistribution& dist) {
  return channel_field(grid, draw_channel_params(rng, grid, dist));
}

Eigen::MatrixXd exp_kernel_cov(std::span<const Point> a, std::span<const Point> b, double sigma,
                               double corr_len) {
  Eigen::MatrixXd c(a.size(), b.size());
  const double var = sigma * sigma;
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t s = 0; s < b.size(); ++s) {
      const double d = std::hypot(a[r].x - b[s].x, a[r].y - b[s].y);
      c(r, s) = var * std::exp(-d / corr_len);
    }
  }
  return c;
}

ConditionalGaussianSampler::ConditionalGaussianSampler(const Grid& grid,
                                                       std::vector<int> conditioning_cells,
                                                       const GaussianFieldParams& params)
    : cell_count_(grid.cell_count()),
      params_(params),
      conditioning_cells_(std::move(conditioning_cells)) {
  if (!(params.sigma > 0.0) || !(params.corr_len > 0.0))
    throw std::invalid_argument("Gaussian field needs sigma > 0 and corr_len > 0");
  std::vector<char> fixed(cell_count_, 0);
  for (int c : conditioning_cells_) {
    if (c < 0 || c >= cell_count_) throw std::invalid_argument("conditioning cell outside grid");
    fixed[c] = 1;
  }
  for (int k = 0; k < cell_count_; ++k)
    if (!fixed[k]) free_cells_.push_back(k);

  std::vector<Point> x, xc;
  for (int k : free_cells_) x.push_back(grid.center(k));
  for (int k : conditioning_cells_) xc.push_back(grid.center(k));

  cov_ = exp_kernel_cov(x, x, params.sigma, params.corr_len);
  if (!xc.empty()) {
    const Eigen::MatrixXd c_xw = exp_kernel_cov(x, xc, params.sigma, params.corr_len);
    const Eigen::MatrixXd c_ww = exp_kernel_cov(xc, xc, params.sigma, params.corr_len);
    const Eigen::MatrixXd gain = c_ww.ldlt().solve(c_xw.transpose());
    cov_.noalias() -= c_xw * gain;
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  }

  const double var = params.sigma * params.sigma;
  Eigen::MatrixXd jittered = cov_;
  jittered.diagonal().array() += 1e-10 * var;
  Eigen::LLT<Eigen::MatrixXd> llt(jittered);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  // Fall back to a symmetric square root; tolerate round-off negatives only.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jittered);
  if (eig.info() != Eigen::Success)
    throw NumericalError("conditional covariance eigen-decomposition failed");
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-8 * var) {
    std::ostringstream msg;
    msg << "conditional covariance not positive semi-definite: min eigenvalue " << min_eig;
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

PermField ConditionalGaussianSampler::sample(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(free_cells_.size());
  for (Eigen::Index r = 0; r < z.size(); ++r) z[r] = normal(rng);
  const Eigen::VectorXd dev = factor_ * z;
  PermField field;
  field.log_perm.assign(cell_count_, params_.mean);
  for (std::size_t r = 0; r < free_cells_.size(); ++r)
    field.log_perm[free_cells_[r]] = params_.mean + dev[static_cast<Eigen::Index>(r)];
  return field;
}

std::vector<double> ConditionalGaussianSampler::cell_variance() const {
  std::vector<double> var(cell_count_, 0.0);
  for (std::size_t r = 0; r < free_cells_.size(); ++r)
    var[free_cells_[r]] = cov_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
  return var;
}

PermField sample_conditional_gaussian(Rng& rng, const Grid& grid, const WellSet& wells,
                                      const GaussianFieldParams& params) {
  std::vector<int> cells(wells.producers());
  cells.insert(cells.end(), wells.injectors().begin(), wells.injectors().end());
  return ConditionalGaussianSampler(grid, std::move(cells), params).sample(rng);
}

void write_field_csv(const std::filesystem::path& path, const PermField& field) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (double g : field.log_perm) out << g << '\n';
}

PermField read_field_csv(const std::filesystem::path& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  PermField field;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    field.log_perm.push_back(std::stod(line));
  }
  if (static_cast<int>(field.size()) != grid.cell_count())
    throw std::runtime_error(path.string() + ": expected " + std::to_string(grid.cell_count()) +
                             " values, got " + std::to_string(field.size()));
  for (double g : field.log_perm)
    if (!std::isfinite(g)) throw std::runtime_error(path.string() + ": non-finite value");
  return field;
}

}  // namespace wellrl
