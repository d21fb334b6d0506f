#include <gtest/gtest.h>

#include <set>

#include "wellrl/grid.hpp"

using namespace wellrl;

TEST(Grid, GeometryAndIndexing) {
  Grid g(61, 61, 1200.0, 1200.0, 0.2);
  EXPECT_EQ(g.cell_count(), 3721);
  EXPECT_DOUBLE_EQ(g.dx(), 1200.0 / 61);
  EXPECT_DOUBLE_EQ(g.pore_volume(), 0.2 * 1200.0 * 1200.0);
  for (int k : {0, 60, 61, 3720}) {
    auto [i, j] = g.unflat(k);
    EXPECT_EQ(g.flat(i, j), k);
  }
  const Point c = g.center(g.flat(0, 0));
  EXPECT_DOUBLE_EQ(c.x, g.dx() / 2);
  EXPECT_DOUBLE_EQ(c.y, g.dy() / 2);
}

TEST(Grid, RejectsBadInput) {
  EXPECT_THROW(Grid(1, 5, 1.0, 1.0, 0.2), std::invalid_argument);
  EXPECT_THROW(Grid(5, 5, 0.0, 1.0, 0.2), std::invalid_argument);
  EXPECT_THROW(Grid(5, 5, 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST(Wells, Case1LineDrive) {
  Grid g(61, 61, 1200.0, 1200.0, 0.2);
  WellSet w = case1_wells(g);
  EXPECT_EQ(w.producer_count(), 31);
  EXPECT_EQ(w.injector_count(), 31);
  EXPECT_DOUBLE_EQ(w.total_rate(), 2304.0);
  // 2 n_p + n_i observation entries, n_p + n_i actions.
  EXPECT_EQ(2 * w.producer_count() + w.injector_count(), 93);
  for (int c : w.injectors()) EXPECT_EQ(g.unflat(c).first, 0);
  for (int c : w.producers()) EXPECT_EQ(g.unflat(c).first, 60);
}

TEST(Wells, Case2FiveSpot) {
  Grid g(31, 31, 1200.0, 1200.0, 0.2);
  WellSet w = case2_wells(g);
  EXPECT_EQ(w.producer_count(), 4);
  ASSERT_EQ(w.injector_count(), 1);
  EXPECT_EQ(w.injectors()[0], g.flat(15, 15));
  std::set<int> corners{g.flat(0, 0), g.flat(30, 0), g.flat(0, 30), g.flat(30, 30)};
  EXPECT_EQ(std::set<int>(w.producers().begin(), w.producers().end()), corners);
  EXPECT_EQ(w.cell_of(4), w.injectors()[0]);
  EXPECT_THROW(five_spot_wells(Grid(30, 31, 1.0, 1.0, 0.2), 1.0), std::invalid_argument);
}

TEST(Wells, Validation) {
  Grid g(5, 5, 1.0, 1.0, 0.2);
  EXPECT_THROW(WellSet(g, {0}, {0}, 1.0), std::invalid_argument);
  EXPECT_THROW(WellSet(g, {0}, {25}, 1.0), std::invalid_argument);
  EXPECT_THROW(WellSet(g, {0}, {1}, 0.0), std::invalid_argument);
  EXPECT_THROW(case1_wells(g), std::invalid_argument);
}
