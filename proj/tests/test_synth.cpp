#include <gtest/gtest.h>

#include <cmath>

#include "radocc/synth.hpp"

using namespace radocc;
using namespace radocc::synth;

namespace {

// Empty scene with one wall segment perpendicular to +x at distance `at`.
Scene wall_scene(double at) {
  Scene s;
  s.extent = 50;
  s.walls.push_back({at, -5, at, 5});
  return s;
}

RadarConfig small_radar() {
  RadarConfig r;
  r.n_azimuth = 64;
  r.n_range = 100;
  r.range_resolution = 0.25;
  return r;
}

}  // namespace

TEST(Rays, SegmentAndCircleIntersections) {
  EXPECT_NEAR(*ray_segment(0, 0, 1, 0, {3, -1, 3, 1}), 3.0, 1e-12);
  EXPECT_FALSE(ray_segment(0, 0, -1, 0, {3, -1, 3, 1}));
  EXPECT_FALSE(ray_segment(0, 0, 1, 0, {3, 1, 3, 2}));
  EXPECT_NEAR(*ray_circle(0, 0, 1, 0, 5, 0, 1), 4.0, 1e-12);
  EXPECT_EQ(*ray_circle(5, 0, 1, 0, 5, 0, 1), 0.0);
  EXPECT_FALSE(ray_circle(0, 0, 0, 1, 5, 0, 1));
}

TEST(Rays, CastRayOrdersHitsAndSkipsTwigsOnRequest) {
  Scene s = wall_scene(10);
  s.permeables.push_back({{5, -2, 5, 2}, 0.5});
  s.twigs.push_back({2, 0, 0.2});
  const auto all = cast_ray(s, 0, 0, 0, 0, true, 100);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].obj.cls, ObjectClass::twig);
  EXPECT_EQ(all[1].obj.cls, ObjectClass::permeable);
  EXPECT_EQ(all[2].obj.cls, ObjectClass::wall);
  EXPECT_EQ(cast_ray(s, 0, 0, 0, 0, false, 100).size(), 2u);
  EXPECT_EQ(cast_ray(s, 0, 0, 0, 0, true, 7).size(), 2u);
}

TEST(Seeds, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}

TEST(Scene, GeneratorInvariantsHoldAcrossSeeds) {
  SceneParams p;
  p.lidar_range = 48;
  p.radar_range = 128;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene s = generate_scene(seed, p);
    const auto problems = check_scene(s, p);
    EXPECT_TRUE(problems.empty()) << "seed " << seed << ": " << (problems.empty() ? "" : problems.front());
  }
}

TEST(Scene, DeterministicAndJsonRoundTrip) {
  SceneParams p;
  const Scene a = generate_scene(7, p), b = generate_scene(7, p);
  EXPECT_EQ(Scene::to_json(a), Scene::to_json(b));
  EXPECT_NE(Scene::to_json(a), Scene::to_json(generate_scene(8, p)));
  EXPECT_EQ(Scene::to_json(scene_from_json(Scene::to_json(a))), Scene::to_json(a));
}

TEST(Scene, ImpossibleRequestRaises) {
  SceneParams p;
  p.n_hedges = 500;
  p.max_retries = 2;
  EXPECT_THROW(generate_scene(1, p), GenerationError);
}

TEST(Radar, WallReturnAtExpectedBin) {
  const auto cfg = small_radar();
  const auto g = render_radar_clean(wall_scene(10.1), 0, {}, cfg, 0.0);
  // Boresight row 0 hits the wall at 10.1 m -> bin 40. No sub-ray sits exactly on
  // boresight, so the peak is tapered by the innermost sub-ray's gain.
  const double u = 0.5 / cfg.subrays;
  EXPECT_NEAR(g(0, 40), cfg.wall_power * (1 - 2 * u * u), 1e-6);
  for (int k = 41; k < 100; ++k) EXPECT_EQ(g(0, k), 0.0f);  // opaque
  // Nothing behind the sensor.
  for (int k = 0; k < 100; ++k) EXPECT_EQ(g(32, k), 0.0f);
}

TEST(Radar, PermeableAttenuatesObjectBehind) {
  auto cfg = small_radar();
  cfg.subrays = 1;
  Scene s = wall_scene(15.1);
  s.permeables.push_back({{8.1, -5, 8.1, 5}, 0.6});
  const auto g = render_radar_clean(s, 0, {}, cfg, 0.0);
  EXPECT_NEAR(g(0, 32), cfg.permeable_power, 1e-6);
  EXPECT_NEAR(g(0, 60), cfg.wall_power * 0.6, 1e-6);
}

TEST(Radar, TwigsHaveNoRadarReturnButBlockLidar) {
  Scene s;
  s.extent = 50;
  s.twigs.push_back({5, 0, 0.3});
  auto cfg = small_radar();
  const auto g = render_radar_clean(s, 0, {}, cfg, 0.0);
  for (float v : g.values.data()) EXPECT_EQ(v, 0.0f);
  LidarConfig lc;
  lc.n_beams = 360;
  lc.ground_rings = {};
  const auto scan = render_lidar(s, 0, {}, lc, 1);
  ASSERT_FALSE(scan.labels.empty());
  for (const auto& l : scan.labels) EXPECT_EQ(l.cls, ObjectClass::twig);
  // Oracle occupancy excludes twigs.
  EXPECT_EQ(count_occupied(true_occupancy(s, 0, {}, cfg.spec()).values), 0u);
}

TEST(Lidar, PermeableBlocksAndGroundRingsStopAtFirstHit) {
  Scene s = wall_scene(12);
  s.permeables.push_back({{6, -3, 6, 3}, 0.6});
  LidarConfig lc;
  lc.n_beams = 8;  // beam 0 points along +x
  lc.range_sigma = 0;
  const auto scan = render_lidar(s, 0, {}, lc, 1);
  bool saw_permeable = false;
  for (std::size_t i = 0; i < scan.labels.size(); ++i) {
    const auto& p = scan.scan.points[i];
    if (std::abs(p.y) > 1e-6 || p.x <= 0) continue;
    if (scan.labels[i].cls == ObjectClass::permeable) saw_permeable = true;
    EXPECT_NE(scan.labels[i].cls, ObjectClass::wall);
    if (scan.labels[i].cls == ObjectClass::ground) {
      EXPECT_LT(p.x, 6.0);
    }
  }
  EXPECT_TRUE(saw_permeable);
}

TEST(Noise, OffLeavesCleanSignal) {
  const auto cfg = small_radar();
  const auto clean = render_radar_clean(wall_scene(10.1), 0, {}, cfg, 0.02);
  EXPECT_EQ(apply_radar_noise(clean, NoiseConfig::off(), 5), clean);
  const auto noisy = apply_radar_noise(clean, NoiseConfig{}, 5);
  EXPECT_NE(noisy, clean);
  EXPECT_EQ(apply_radar_noise(clean, NoiseConfig{}, 5), noisy);
  for (float v : noisy.values.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Truth, MovingVehicleFootprintFollowsTime) {
  Scene s;
  s.extent = 100;
  Vehicle v;
  v.x = 20;
  v.vx = 4;
  s.vehicles.push_back(v);
  const auto cfg = small_radar();
  const auto c0 = object_cells(s, {ObjectClass::vehicle, 0}, 0.0, {}, cfg.spec());
  const auto c1 = object_cells(s, {ObjectClass::vehicle, 0}, 1.0, {}, cfg.spec());
  ASSERT_FALSE(c0.empty());
  ASSERT_FALSE(c1.empty());
  int min0 = 1000, min1 = 1000;
  for (auto [a, k] : c0) min0 = std::min(min0, k);
  for (auto [a, k] : c1) min1 = std::min(min1, k);
  // Rear face at 17.75 m, then 21.75 m.
  EXPECT_EQ(min0, 71);
  EXPECT_EQ(min1, 87);
}

TEST(Sequence, DeterministicAndTimed) {
  SequenceConfig cfg;
  cfg.radar = small_radar();
  cfg.scene.radar_range = cfg.radar.n_range * cfg.radar.range_resolution;
  cfg.scene.n_far_vehicles = 0;  // no room beyond lidar range in a 25 m grid
  cfg.lidar.n_beams = 256;
  const auto a = simulate_sequence(3, 3, cfg), b = simulate_sequence(3, 3, cfg);
  ASSERT_EQ(a.radar.size(), 3u);
  EXPECT_EQ(a.lidar.size(), 15u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(a.radar[k].raw_power, b.radar[k].raw_power);
    EXPECT_EQ(a.truth[k], b.truth[k]);
  }
  for (std::size_t j = 0; j < 15; ++j) EXPECT_EQ(a.lidar[j].scan, b.lidar[j].scan);
  EXPECT_EQ(a.radar[1].timestamp - a.radar[0].timestamp, 250000);
  // Lidar scans are centred on each radar frame.
  EXPECT_EQ(a.lidar[2].scan.timestamp, a.radar[0].timestamp);
  EXPECT_NEAR(a.seconds(a.radar[2].timestamp), 0.5, 1e-12);
}
