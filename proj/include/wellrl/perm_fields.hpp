#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <vector>

#include "wellrl/grid.hpp"
#include "wellrl/random.hpp"

namespace wellrl {

/// Per-cell log-permeability g; permeability is k = exp(g).
struct PermField {
  std::vector<double> log_perm;

  std::size_t size() const { return log_perm.size(); }
  double perm(std::size_t k) const;
  std::vector<double> perm() const;
};

struct ChannelParams {
  double width = 360.0;
  double left_offset = 0.0;   // l1, distance of the channel's upper edge from the top at x = 0
  double right_offset = 0.0;  // l2, same at x = L
  double g_high = 5.5;
  double g_low = -2.0;
};

struct ChannelDistribution {
  double width_min = 120.0;
  double width_max = 360.0;
  double g_high = 5.5;
  double g_low = -2.0;
};

/// Rasterises a straight channel onto the grid: a cell is g_high iff its centre
/// satisfies (l2-l1)/L*x + l1 <= y <= (l2-l1)/L*x + l1 + w, with L = lx.
PermField channel_field(const Grid& grid, const ChannelParams& params);

/// w ~ U(wmin, wmax), then l1, l2 ~ U(0, L - w).
ChannelParams draw_channel_params(Rng& rng, const Grid& grid, const ChannelDistribution& dist);

PermField sample_channel(Rng& rng, const Grid& grid, const ChannelDistribution& dist);

/// C[a, b] = sigma^2 exp(-|a - b| / corr_len).
Eigen::MatrixXd exp_kernel_cov(std::span<const Point> a, std::span<const Point> b, double sigma,
                               double corr_len);

struct GaussianFieldParams {
  double mean = 2.41;
  double sigma = 2.5;
  double corr_len = 240.0;
};

/// Gaussian log-permeability conditioned to equal `mean` at a set of cells.
///
/// The free cells x are sampled from N(mean, C(x,x) - C(x,x') C(x',x')^-1 C(x',x));
/// conditioning cells x' are set to `mean` exactly. The kriging correction of the
/// mean vanishes because every conditioning value equals the prior mean. The
/// covariance is factorised once at construction so repeated draws are cheap.
class ConditionalGaussianSampler {
 public:
  ConditionalGaussianSampler(const Grid& grid, std::vector<int> conditioning_cells,
                             const GaussianFieldParams& params);

  PermField sample(Rng& rng) const;

  const std::vector<int>& free_cells() const { return free_cells_; }
  const std::vector<int>& conditioning_cells() const { return conditioning_cells_; }
  /// Conditional covariance over free cells (before jitter).
  const Eigen::MatrixXd& conditional_cov() const { return cov_; }
  /// Per-cell variance over the whole grid (zero at conditioning cells).
  std::vector<double> cell_variance() const;

 private:
  int cell_count_;
  GaussianFieldParams params_;
  std::vector<int> conditioning_cells_;
  std::vector<int> free_cells_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd factor_;  // lower-triangular or symmetric square root
};

PermField sample_conditional_gaussian(Rng& rng, const Grid& grid, const WellSet& wells,
                                      const GaussianFieldParams& params);

/// Row-major, one value per line, nx*ny lines.
void write_field_csv(const std::filesystem::path& path, const PermField& field);
PermField read_field_csv(const std::filesystem::path& path, const Grid& grid);

}  // namespace wellrl
