#include "wellrl/grid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace wellrl {

Grid::Grid(int nx, int ny, double lx, double ly, double porosity)
    : nx_(nx), ny_(ny), lx_(lx), ly_(ly), porosity_(porosity) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("grid needs at least 2 cells per direction");
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("grid extents must be positive");
  if (!(porosity > 0.0 && porosity < 1.0))
    throw std::invalid_argument("porosity must lie in (0, 1)");
  dx_ = lx / nx;
  dy_ = ly / ny;
}

Point Grid::center(int k) const {
  const auto [i, j] = unflat(k);
  return {(i + 0.5) * dx_, (j + 0.5) * dy_};
}

Grid build_grid(int nx, int ny, double lx, double ly, double porosity) {
  return Grid(nx, ny, lx, ly, porosity);
}

WellSet::WellSet(const Grid& grid, std::vector<int> producers, std::vector<int> injectors,
                 double total_rate)
    : producers_(std::move(producers)), injectors_(std::move(injectors)), total_rate_(total_rate) {
  if (!(total_rate > 0.0)) throw std::invalid_argument("total well rate must be positive");
  if (producers_.empty() || injectors_.empty())
    throw std::invalid_argument("need at least one producer and one injector");
  std::vector<int> all(producers_);
  all.insert(all.end(), injectors_.begin(), injectors_.end());
  for (int c : all) {
    if (c < 0 || c >= grid.cell_count())
      throw std::invalid_argument("well cell " + std::to_string(c) + " outside grid");
  }
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw std::invalid_argument("well cells must be distinct (producers and injectors disjoint)");
}

int WellSet::cell_of(int w) const {
  return w < producer_count() ? producers_[w] : injectors_[w - producer_count()];
}

WellSet line_drive_wells(const Grid& grid, int row_stride, double total_rate) {
  if (row_stride < 1) throw std::invalid_argument("row stride must be >= 1");
  std::vector<int> producers, injectors;
  for (int j = 0; j < grid.ny(); j += row_stride) {
    injectors.push_back(grid.flat(0, j));
    producers.push_back(grid.flat(grid.nx() - 1, j));
  }
  return WellSet(grid, std::move(producers), std::move(injectors), total_rate);
}

WellSet five_spot_wells(const Grid& grid, double total_rate) {
  if (grid.nx() % 2 == 0 || grid.ny() % 2 == 0)
    throw std::invalid_argument("five-spot pattern needs odd nx and ny (unique centre cell)");
  const int ie = grid.nx() - 1, je = grid.ny() - 1;
  std::vector<int> producers{grid.flat(0, 0), grid.flat(ie, 0), grid.flat(0, je), grid.flat(ie, je)};
  std::vector<int> injectors{grid.flat(ie / 2, je / 2)};
  return WellSet(grid, std::move(producers), std::move(injectors), total_rate);
}

WellSet case1_wells(const Grid& grid) {
  if (grid.ny() < 31)
    throw std::invalid_argument("line-drive well pattern needs ny >= 31, got " +
                                std::to_string(grid.ny()));
  return line_drive_wells(grid, 2, kCase1TotalRate);
}

WellSet case2_wells(const Grid& grid) { return five_spot_wells(grid, kCase2TotalRate); }

}  // namespace wellrl
