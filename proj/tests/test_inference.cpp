#include <gtest/gtest.h>

#include <random>

#include "radocc/inference.hpp"

using namespace radocc;

namespace {

ModelCheckpoint random_model(std::uint64_t seed) {
  NetSpec spec;
  spec.depth = 2;
  spec.base_channels = 4;
  nn::UNet net(spec, seed);
  ModelCheckpoint ck;
  ck.spec = spec;
  detail::snapshot(net, ck);
  return ck;
}

PolarGrid random_radar(int n_az, int n_r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  PolarGrid g(n_az, n_r, 0.25);
  for (float& v : g.values.data()) v = u(rng);
  return g;
}

}  // namespace

TEST(WindowOffsets, StrideAndClampedTail) {
  EXPECT_EQ(window_offsets(930, 300, 60), (std::vector<int>{0, 60, 120, 180, 240, 300, 360, 420, 480, 540, 600, 630}));
  EXPECT_EQ(window_offsets(512, 96, 16).size(), 27u);
  EXPECT_EQ(window_offsets(100, 100, 10), (std::vector<int>{0}));
  EXPECT_EQ(window_offsets(120, 60, 60), (std::vector<int>{0, 60}));
  EXPECT_THROW(window_offsets(50, 60, 10), InvalidArgument);
  EXPECT_THROW(window_offsets(100, 60, 70), InvalidArgument);
  EXPECT_THROW(window_offsets(100, 60, 0), InvalidArgument);
}

TEST(WindowOffsets, CoverEveryBinProperty) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const int w = 1 + static_cast<int>(rng() % 100);
    const int s = 1 + static_cast<int>(rng() % w);
    const int n = w + static_cast<int>(rng() % 400);
    const auto offs = window_offsets(n, w, s);
    std::vector<int> cover(static_cast<std::size_t>(n), 0);
    for (int o : offs) {
      ASSERT_GE(o, 0);
      ASSERT_LE(o + w, n);
      for (int k = o; k < o + w; ++k) ++cover[static_cast<std::size_t>(k)];
    }
    for (int c : cover) ASSERT_GE(c, 1);
    for (std::size_t i = 1; i < offs.size(); ++i) ASSERT_LE(offs[i] - offs[i - 1], s);
    ASSERT_EQ(offs.front(), 0);
  }
}

TEST(SlidingWindow, MaxCombineMatchesPerWindowOracle) {
  auto near_ck = random_model(1), far_ck = random_model(2);
  Predictor near(near_ck), far(far_ck);
  InferenceConfig cfg{16, 8, Combine::max, 0.5f};
  const auto radar = random_radar(16, 52, 3);
  const auto res = SlidingWindowInference(near, far, cfg).run(radar);
  const auto offs = window_offsets(52, 16, 8);
  ASSERT_EQ(res.offsets, offs);
  Raster expect(16, 52, 0.0f);
  for (std::size_t w = 0; w < offs.size(); ++w) {
    Predictor& m = w == 0 ? near : far;
    const Raster p = m.predict(crop_polar_range(radar, offs[w], 16).values);
    for (int a = 0; a < 16; ++a)
      for (int k = 0; k < 16; ++k) expect(a, offs[w] + k) = std::max(expect(a, offs[w] + k), p(a, k));
  }
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(res.probability.values.data()[i], expect.data()[i], 1e-6f);
  EXPECT_EQ(res.occupancy, binarize(res.probability, 0.5f));
}

TEST(SlidingWindow, NearModelOwnsFirstStride) {
  auto near_ck = random_model(4), far_ck = random_model(5);
  Predictor near(near_ck), far(far_ck);
  const auto radar = random_radar(16, 64, 6);
  const auto res = SlidingWindowInference(near, far, InferenceConfig{16, 8, Combine::max, 0.5f}).run(radar);
  const Raster p = near.predict(crop_polar_range(radar, 0, 16).values);
  // Bins [0, 8) are covered only by the first window.
  for (int a = 0; a < 16; ++a)
    for (int k = 0; k < 8; ++k) EXPECT_FLOAT_EQ(res.probability(a, k), p(a, k));
}

TEST(SlidingWindow, MeanCombineDividesByCoverage) {
  auto ck = random_model(7);
  Predictor m(ck);
  const auto radar = random_radar(16, 32, 8);
  const auto res = SlidingWindowInference(m, m, InferenceConfig{16, 8, Combine::mean, 0.5f}).run(radar);
  const Raster w0 = m.predict(crop_polar_range(radar, 0, 16).values);
  const Raster w1 = m.predict(crop_polar_range(radar, 8, 16).values);
  EXPECT_NEAR(res.probability(3, 10), (w0(3, 10) + w1(3, 2)) / 2.0f, 1e-6f);
  EXPECT_NEAR(res.probability(3, 2), w0(3, 2), 1e-6f);
}

TEST(SlidingWindow, OrBinaryYieldsOccupancyValues) {
  auto ck = random_model(9);
  Predictor m(ck);
  const auto res = SlidingWindowInference(m, m, InferenceConfig{16, 4, Combine::or_binary, 0.5f}).run(random_radar(16, 40, 10));
  for (float v : res.probability.values.data()) EXPECT_TRUE(v == 0.0f || v == 1.0f);
}

TEST(SlidingWindow, RejectsBadInputs) {
  auto ck = random_model(11);
  ck.n_azimuth = 16;
  ck.range_resolution = 0.25;
  Predictor m(ck);
  SlidingWindowInference s(m, m, InferenceConfig{16, 8, Combine::max, 0.5f});
  EXPECT_THROW(s.run(PolarGrid(16, 10, 0.25)), InvalidArgument);  // shorter than a window
  EXPECT_THROW(s.run(PolarGrid(16, 40, 0.25, GridKind::probability)), InvalidArgument);
  EXPECT_THROW(s.run(PolarGrid(8, 40, 0.25)), InvalidArgument);
  EXPECT_THROW(SlidingWindowInference(m, m, InferenceConfig{16, 0, Combine::max, 0.5f}), InvalidArgument);
  EXPECT_THROW(combine_from_string("median"), InvalidArgument);
}

TEST(FullRange, CartesianViewAndTiming) {
  auto ck = random_model(12);
  Predictor m(ck);
  SlidingWindowInference s(m, m, InferenceConfig{16, 8, Combine::max, 0.5f});
  std::vector<PolarGrid> frames = {random_radar(16, 40, 13), random_radar(16, 40, 14)};
  int seen = 0;
  const auto t = full_range_predict(
      frames.size(), [&](std::size_t i) { return frames[i]; }, s, 0.5, 0.0, [&](std::size_t i, const FramePrediction& p) {
        EXPECT_EQ(p.polar.probability, s.run(frames[i]).probability);
        EXPECT_EQ(p.cartesian_probability.width(), 40);  // 2 * 40 * 0.25 m at 0.5 m
        EXPECT_EQ(p.cartesian_occupancy.kind, GridKind::occupancy);
        ++seen;
      });
  EXPECT_EQ(seen, 2);
  EXPECT_EQ(t.frames, 2u);
  EXPECT_EQ(t.windows, 2 * window_offsets(40, 16, 8).size());
}
