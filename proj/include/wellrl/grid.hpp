#pragma once

#include <utility>
#include <vector>

namespace wellrl {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Structured 2D cell-centred grid. Row j = 0 is the top edge of the domain
/// and column i = 0 the left edge; the flat cell index is j * nx + i.
class Grid {
 public:
  /// Throws std::invalid_argument unless nx, ny >= 2, lx, ly > 0 and 0 < phi < 1.
  Grid(int nx, int ny, double lx, double ly, double porosity);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double porosity() const { return porosity_; }

  int cell_count() const { return nx_ * ny_; }
  double cell_area() const { return dx_ * dy_; }
  double pore_volume() const { return porosity_ * lx_ * ly_; }

  int flat(int i, int j) const { return j * nx_ + i; }
  std::pair<int, int> unflat(int k) const { return {k % nx_, k / nx_}; }
  bool contains(int i, int j) const { return i >= 0 && i < nx_ && j >= 0 && j < ny_; }

  /// Cell centre, measured in ft from the upper-left corner.
  Point center(int k) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int nx_;
  int ny_;
  double lx_;
  double ly_;
  double dx_;
  double dy_;
  double porosity_;
};

Grid build_grid(int nx, int ny, double lx, double ly, double porosity);

/// Producer and injector cells plus the fixed total injection rate c
/// (ft^2/day per unit thickness). Actions and rate vectors list producers
/// first, then injectors, in registry order.
class WellSet {
 public:
  WellSet(const Grid& grid, std::vector<int> producers, std::vector<int> injectors,
          double total_rate);

  const std::vector<int>& producers() const { return producers_; }
  const std::vector<int>& injectors() const { return injectors_; }
  int producer_count() const { return static_cast<int>(producers_.size()); }
  int injector_count() const { return static_cast<int>(injectors_.size()); }
  int well_count() const { return producer_count() + injector_count(); }
  double total_rate() const { return total_rate_; }

  /// Cell index of well w in producers-then-injectors order.
  int cell_of(int w) const;

 private:
  std::vector<int> producers_;
  std::vector<int> injectors_;
  double total_rate_;
};

/// Injectors in the left column and producers in the right column, one well
/// every `row_stride` rows starting at row 0.
WellSet line_drive_wells(const Grid& grid, int row_stride, double total_rate);

/// Producers in the four corners, one injector in the centre cell. Requires
/// odd nx and ny.
WellSet five_spot_wells(const Grid& grid, double total_rate);

inline constexpr double kCase1TotalRate = 2304.0;
inline constexpr double kCase2TotalRate = 8064.0;

/// Channel test case: line drive on every other row, c = 2304. Needs ny >= 31.
WellSet case1_wells(const Grid& grid);

/// Correlated-field test case: five-spot, c = 8064.
WellSet case2_wells(const Grid& grid);

}  // namespace wellrl
