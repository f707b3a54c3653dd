#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "radocc/grid_geometry.hpp"

using namespace radocc;

namespace {

PolarGrid random_grid(int n_az, int n_r, double res, GridKind kind, std::mt19937_64& rng) {
  PolarGrid g(n_az, n_r, res, kind);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : g.values.data()) v = kind == GridKind::occupancy ? (u(rng) < 0.3f ? 1.0f : 0.0f) : u(rng);
  return g;
}

}  // namespace

TEST(PolarToCartesian, OccupancyPicksContainingBin) {
  PolarGrid g(8, 10, 1.0, GridKind::occupancy);
  g(0, 4) = 1.0f;  // azimuth 0 (+x), range [4, 5)
  const auto c = polar_to_cartesian(g, 0.5, 10.0);
  EXPECT_EQ(c.width(), 40);
  EXPECT_EQ(sample_cartesian(c, 4.5, 0.0), 1.0f);
  EXPECT_EQ(sample_cartesian(c, 3.5, 0.0), 0.0f);
  EXPECT_EQ(sample_cartesian(c, 0.0, 4.5), 0.0f);
}

TEST(PolarToCartesian, RejectsExtentBeyondRange) {
  PolarGrid g(8, 10, 1.0);
  EXPECT_THROW(polar_to_cartesian(g, 0.5, 10.5), InvalidArgument);
  EXPECT_THROW(polar_to_cartesian(g, 0.0, 5.0), InvalidArgument);
}

TEST(PolarToCartesian, ConstantFieldIsPreserved) {
  PolarGrid g(64, 40, 0.5, GridKind::probability);
  for (float& v : g.values.data()) v = 0.625f;
  const auto c = polar_to_cartesian(g, 0.5, 14.0);
  for (int r = 0; r < c.height(); ++r)
    for (int col = 0; col < c.width(); ++col) {
      const auto [x, y] = c.pixel_to_metric(r, col);
      if (std::hypot(x, y) < 14.0) {
        EXPECT_FLOAT_EQ(c(r, col), 0.625f);
      }
    }
}

TEST(PolarToCartesian, AzimuthIsCircular) {
  // Interpolating between the last and first azimuth rows must not hit an edge.
  PolarGrid g(4, 20, 1.0, GridKind::probability);
  for (int k = 0; k < 20; ++k) {
    g(3, k) = 1.0f;
    g(0, k) = 1.0f;
  }
  const double theta = 2 * std::numbers::pi * 0.875;  // halfway between rows 3 and 0
  EXPECT_NEAR(sample_polar(g, 10.0 * std::cos(theta), 10.0 * std::sin(theta)), 1.0f, 1e-6);
}

TEST(RoundTrip, SmoothFieldAtMatchedResolution) {
  PolarGrid g(200, 300, 0.2, GridKind::probability);
  for (int a = 0; a < 200; ++a)
    for (int k = 0; k < 300; ++k)
      g(a, k) = static_cast<float>(0.5 + 0.3 * std::sin(2 * g.azimuth_of(a)) * std::cos(k / 40.0));
  const auto back = cartesian_to_polar(polar_to_cartesian(g, 0.2, 60.0), 200, 300, 0.2);
  double sum = 0;
  int n = 0;
  for (int a = 0; a < 200; ++a)
    for (int k = 10; k < 300; ++k) {
      sum += std::abs(back(a, k) - g(a, k));
      ++n;
    }
  EXPECT_LT(sum / n, 0.05);
}

TEST(RoundTrip, OccupancyValuesStayBinary) {
  std::mt19937_64 rng(5);
  const auto g = random_grid(64, 50, 0.5, GridKind::occupancy, rng);
  const auto c = polar_to_cartesian(g, 0.5, 25.0);
  EXPECT_NO_THROW(c.validate());
  EXPECT_NO_THROW(cartesian_to_polar(c, 64, 50, 0.5).validate());
}

TEST(RotateAzimuth, ShiftsRowsCyclically) {
  std::mt19937_64 rng(6);
  const auto g = random_grid(16, 5, 1.0, GridKind::probability, rng);
  const auto r = rotate_azimuth(g, 3);
  for (int i = 0; i < 16; ++i)
    for (int k = 0; k < 5; ++k) EXPECT_EQ(r((i + 3) % 16, k), g(i, k));
  EXPECT_EQ(rotate_azimuth(rotate_azimuth(g, 5), -5), g);
  EXPECT_EQ(rotate_azimuth(g, 16), g);
}

TEST(CropPolar, RecordsOffsetAndEmbedsBack) {
  std::mt19937_64 rng(7);
  const auto g = random_grid(10, 50, 0.2, GridKind::probability, rng);
  const auto w = crop_polar_range(g, 12, 20);
  EXPECT_EQ(w.range_offset, 12);
  EXPECT_EQ(w(3, 0), g(3, 12));
  EXPECT_NEAR(w.max_range(), 32 * 0.2, 1e-12);
  const auto ww = crop_polar_range(w, 5, 10);
  EXPECT_EQ(ww.range_offset, 17);
  PolarGrid target(10, 50, 0.2, GridKind::probability);
  embed_polar_range(w, target);
  for (int a = 0; a < 10; ++a)
    for (int k = 0; k < 50; ++k) EXPECT_EQ(target(a, k), (k >= 12 && k < 32) ? g(a, k) : 0.0f);
  EXPECT_THROW(crop_polar_range(g, 40, 20), InvalidArgument);
  EXPECT_THROW(crop_polar_range(g, -1, 5), InvalidArgument);
}

TEST(CropCartesian, KeepsSensorCentred) {
  auto c = CartesianGrid::centered(100, 0.25);
  c(49, 49) = 1.0f;
  const auto k = crop_cartesian_center(c, 20);
  EXPECT_DOUBLE_EQ(k.origin_row, 9.5);
  EXPECT_EQ(k(9, 9), 1.0f);
  EXPECT_THROW(crop_cartesian_center(c, 101), InvalidArgument);
}

TEST(Regions, PolarBandsCoverBins) {
  const auto m = region_mask(RegionSpec{100, 2, Space::polar}, 4, 930, 0, 0);
  for (int k = 0; k < 930; ++k) EXPECT_EQ(m(1, k), (k >= 200 && k < 300) ? 1 : 0);
  // n = 9 ends at bin 1000, beyond 930 bins.
  EXPECT_THROW(region_mask(RegionSpec{100, 9, Space::polar}, 4, 930, 0, 0), OutOfRange);
}

TEST(Regions, CartesianChebyshevRing) {
  const auto m = region_mask(RegionSpec{10, 1, Space::cartesian}, 60, 60);
  // Origin at 29.5: column 40 sits 10.5 px out, column 39 only 9.5.
  EXPECT_EQ(m(29, 40), 1);
  EXPECT_EQ(m(29, 39), 0);
  EXPECT_EQ(m(19, 40), 1);  // corner of the square ring
  EXPECT_EQ(m(29, 49), 1);
  EXPECT_EQ(m(29, 50), 0);
}

TEST(Regions, CircularAnnulusExcludesCorners) {
  const RegionSpec circ{10, 1, Space::cartesian, RegionRole::eval, RegionShape::circular};
  const auto m = region_mask(circ, 60, 60);
  const auto sq = region_mask(RegionSpec{10, 1, Space::cartesian}, 60, 60);
  // (11, 47): Chebyshev 18.5, Euclidean 25.5.
  EXPECT_EQ(sq(11, 47), 1);
  EXPECT_EQ(m(11, 47), 0);
  EXPECT_EQ(m(29, 42), 1);
}

TEST(Regions, PartitionIsExactForRandomShapes) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 40; ++t) {
    const int d = 3 + static_cast<int>(rng() % 20);
    const int rows = 8 + static_cast<int>(rng() % 90), cols = 8 + static_cast<int>(rng() % 90);
    const bool polar = t % 2 == 0;
    const auto p = polar ? region_partition(d, Space::polar, RegionShape::native, rows, cols, 0, 0)
                         : region_partition(d, Space::cartesian, t % 4 == 1 ? RegionShape::native : RegionShape::circular,
                                            rows, cols, (rows - 1) / 2.0, (cols - 1) / 2.0);
    std::vector<int> cover(static_cast<std::size_t>(rows) * cols, 0);
    for (const auto& m : p.regions)
      for (std::size_t i = 0; i < m.size(); ++i) cover[i] += m.data()[i];
    for (std::size_t i = 0; i < cover.size(); ++i) cover[i] += p.remainder.data()[i];
    for (int v : cover) ASSERT_EQ(v, 1);
    if (polar) {
      EXPECT_EQ(static_cast<int>(p.regions.size()), cols / d);
    }
    EXPECT_EQ(p.remainder_cells, mask_count(p.remainder));
  }
}
