#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "radocc/gt_builder.hpp"

using namespace radocc;

namespace {

PolarGrid random_polar(int n_az, int n_r, GridKind kind, double density, std::mt19937_64& rng) {
  PolarGrid g(n_az, n_r, 0.5, kind);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : g.values.data()) v = kind == GridKind::occupancy ? (u(rng) < density ? 1.0f : 0.0f) : u(rng) * 0.2f;
  return g;
}

// Direct definition of the filter used as the oracle.
PolarGrid filter_oracle(const PolarGrid& gt, const PolarGrid& radar, double p, int k) {
  PolarGrid out = gt;
  for (int a = 0; a < gt.n_azimuth(); ++a)
    for (int b = 0; b < gt.n_range(); ++b) {
      if (gt(a, b) < 0.5f) continue;
      bool visible = false;
      for (int da = -k; da <= k; ++da)
        for (int db = -k; db <= k; ++db) {
          const int aa = (a + da + gt.n_azimuth()) % gt.n_azimuth();
          const int bb = b + db;
          if (bb >= 0 && bb < gt.n_range() && radar(aa, bb) >= static_cast<float>(p)) visible = true;
        }
      out(a, b) = visible ? 1.0f : 0.0f;
    }
  return out;
}

}  // namespace

TEST(VisibilityFilter, MatchesOracle) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    const int n_az = 3 + static_cast<int>(rng() % 30), n_r = 3 + static_cast<int>(rng() % 40);
    const auto gt = random_polar(n_az, n_r, GridKind::occupancy, 0.3, rng);
    const auto radar = random_polar(n_az, n_r, GridKind::power, 0, rng);
    GtConfig cfg;
    cfg.p = 0.05 + (rng() % 100) / 1000.0;
    cfg.visibility_neighborhood = static_cast<int>(rng() % 3);
    EXPECT_EQ(radar_visibility_filter(gt, radar, cfg).values, filter_oracle(gt, radar, cfg.p, cfg.visibility_neighborhood).values);
  }
}

TEST(VisibilityFilter, OnlyRemovesCells) {
  std::mt19937_64 rng(22);
  const auto gt = random_polar(40, 60, GridKind::occupancy, 0.4, rng);
  const auto radar = random_polar(40, 60, GridKind::power, 0, rng);
  GtConfig cfg;
  const auto f = radar_visibility_filter(gt, radar, cfg);
  for (std::size_t i = 0; i < gt.values.size(); ++i) EXPECT_LE(f.values.data()[i], gt.values.data()[i]);
  const auto s = filter_stats(gt, f);
  EXPECT_EQ(s.gt_cells, count_occupied(gt.values));
  EXPECT_EQ(s.removed() + s.kept_cells, s.gt_cells);
}

TEST(VisibilityFilter, MonotoneInThresholdAndNeighbourhood) {
  std::mt19937_64 rng(23);
  const auto gt = random_polar(30, 30, GridKind::occupancy, 0.5, rng);
  const auto radar = random_polar(30, 30, GridKind::power, 0, rng);
  std::size_t prev = SIZE_MAX;
  for (double p : {0.0, 0.05, 0.1, 0.15, 0.25}) {
    GtConfig cfg;
    cfg.p = p;
    const auto kept = count_occupied(radar_visibility_filter(gt, radar, cfg).values);
    EXPECT_LE(kept, prev);
    prev = kept;
  }
  GtConfig c0, c2;
  c0.visibility_neighborhood = 0;
  c2.visibility_neighborhood = 2;
  EXPECT_LE(count_occupied(radar_visibility_filter(gt, radar, c0).values),
            count_occupied(radar_visibility_filter(gt, radar, c2).values));
  GtConfig zero;
  zero.p = 0.0;
  EXPECT_EQ(radar_visibility_filter(gt, radar, zero).values, gt.values);
}

TEST(VisibilityFilter, WrapsAzimuth) {
  PolarGrid gt(10, 5, 1.0, GridKind::occupancy);
  PolarGrid radar(10, 5, 1.0);
  gt(0, 2) = 1.0f;
  radar(9, 2) = 0.5f;
  GtConfig cfg;
  EXPECT_EQ(radar_visibility_filter(gt, radar, cfg)(0, 2), 1.0f);
  cfg.visibility_neighborhood = 0;
  EXPECT_EQ(radar_visibility_filter(gt, radar, cfg)(0, 2), 0.0f);
}

TEST(VisibilityFilter, RejectsMismatchedGrids) {
  GtConfig cfg;
  EXPECT_THROW(radar_visibility_filter(PolarGrid(4, 4, 1.0), PolarGrid(4, 5, 1.0), cfg), InvalidArgument);
  cfg.p = 1.5;
  EXPECT_THROW(radar_visibility_filter(PolarGrid(4, 4, 1.0), PolarGrid(4, 4, 1.0), cfg), InvalidArgument);
}

TEST(Rasterize, PolarCellAssignment) {
  const PolarSpec spec{8, 10, 1.0};
  // Azimuth 0.9 * step rounds to row 1; range 3.99 -> bin 3.
  const double step = 2 * std::numbers::pi / 8;
  const auto g = rasterize({{3.99 * std::cos(0.9 * step), 3.99 * std::sin(0.9 * step)}, {20.0, 0.0}}, spec);
  EXPECT_EQ(g(1, 3), 1.0f);
  EXPECT_EQ(count_occupied(g.values), 1u);
  // Just below azimuth 2pi maps back to row 0.
  const auto h = rasterize({{5.5 * std::cos(-0.1), 5.5 * std::sin(-0.1)}}, spec);
  EXPECT_EQ(h(0, 5), 1.0f);
}

TEST(Rasterize, MinPointsPerCell) {
  const PolarSpec spec{4, 4, 1.0};
  const std::vector<Point2> pts = {{1.5, 0}, {1.6, 0}, {2.5, 0}};
  EXPECT_EQ(count_occupied(rasterize(pts, spec, 1).values), 2u);
  EXPECT_EQ(count_occupied(rasterize(pts, spec, 2).values), 1u);
}

TEST(Rasterize, CartesianPixelOfPoint) {
  const CartesianSpec spec{11, 1.0};
  const auto g = rasterize({{2.0, 3.0}, {-100.0, 0.0}}, spec);
  EXPECT_EQ(g(5 - 3, 5 + 2), 1.0f);
  EXPECT_EQ(count_occupied(g.values), 1u);
}

TEST(Aggregate, MotionCompensationAlignsStaticPoint) {
  // Vehicle drives along +x; a static point at world (10, 0) must land at the
  // same sensor-frame position for every scan once compensated.
  PoseTrajectory traj({{0, {0, 0, 0}}, {1000, {5, 0, 0}}});
  std::vector<LidarScan> scans;
  for (Timestamp t : {0, 250, 500, 750, 1000}) {
    const double x = t * 5.0 / 1000.0;
    scans.push_back({t, {{static_cast<float>(10.0 - x), 0.0f, 0.0f, 1.0f}, {1.0f, 1.0f, -3.0f, 1.0f}}});
  }
  GtConfig cfg;
  const auto pts = aggregate_scans(scans, traj, 500, cfg);
  ASSERT_EQ(pts.size(), 5u);  // ground points removed
  for (const auto& p : pts) {
    EXPECT_NEAR(p.x, 7.5, 1e-5);
    EXPECT_NEAR(p.y, 0.0, 1e-5);
  }
  cfg.motion_compensation = false;
  const auto raw = aggregate_scans(scans, traj, 500, cfg);
  EXPECT_NEAR(raw.front().x, 10.0, 1e-5);
  EXPECT_NEAR(raw.back().x, 5.0, 1e-5);
}

TEST(Aggregate, RangeLimit) {
  PoseTrajectory traj({{0, {}}, {10, {}}});
  GtConfig cfg;
  cfg.gt_max_range = 5.0;
  const auto pts = aggregate_scans({{5, {{3, 4, 0, 0}, {3.1f, 4, 0, 0}}}}, traj, 5, cfg);
  EXPECT_EQ(pts.size(), 1u);
}
