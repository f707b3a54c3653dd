#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "radocc/model.hpp"

using namespace radocc;
namespace fs = std::filesystem;

namespace {

std::vector<TrainingPair> toy_data(int n, int rows, int cols, std::uint64_t seed) {
  // Target = input above 0.6: learnable by a single conv layer.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<TrainingPair> out;
  for (int i = 0; i < n; ++i) {
    TrainingPair p{Raster(rows, cols), Raster(rows, cols), cols};
    for (std::size_t k = 0; k < p.input.size(); ++k) {
      p.input.data()[k] = u(rng);
      p.target.data()[k] = p.input.data()[k] > 0.6f ? 1.0f : 0.0f;
    }
    out.push_back(std::move(p));
  }
  return out;
}

NetSpec small_spec() {
  NetSpec s;
  s.depth = 2;
  s.base_channels = 4;
  return s;
}

TrainConfig small_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.train_range_bins = 16;
  c.lr = 3e-3;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("radocc_test_model_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

}  // namespace

TEST(Tversky, EqualWeightsIsDice) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(50), g(50);
    for (int i = 0; i < 50; ++i) {
      p[static_cast<std::size_t>(i)] = u(rng);
      g[static_cast<std::size_t>(i)] = u(rng) < 0.4 ? 1 : 0;
    }
    double tp = 0, sp = 0, sg = 0;
    for (int i = 0; i < 50; ++i) {
      tp += p[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
      sp += p[static_cast<std::size_t>(i)];
      sg += g[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(tversky_loss_value<double>(p, g, 0.5, 0.5, 0.0), 1 - 2 * tp / (sp + sg), 1e-12);
  }
}

TEST(Tversky, BoundsAndPerfectPrediction) {
  std::vector<double> g = {1, 0, 1, 0};
  EXPECT_NEAR(tversky_loss_value<double>(g, g, 0.3, 0.7, 1.0), 0.0, 1e-12);
  std::vector<double> inv = {0, 1, 0, 1};
  EXPECT_NEAR(tversky_loss_value<double>(inv, g, 0.3, 0.7, 0.0), 1.0, 1e-12);
  std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(tversky_loss_value<double>(zeros, zeros, 0.5, 0.5, 0.0), 0.0);
}

TEST(Tversky, LargerBetaPunishesMissesMore) {
  // Under-prediction: FN dominate, so loss grows with beta.
  std::vector<double> g = {1, 1, 1, 1, 0, 0};
  std::vector<double> p = {0.9, 0.2, 0.1, 0.1, 0.1, 0.0};
  double prev = -1;
  for (double beta : {0.3, 0.5, 0.7, 0.9}) {
    const double l = tversky_loss_value<double>(p, g, 1 - beta, beta, 1.0);
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST(Tversky, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> p(30), g(30);
  for (std::size_t i = 0; i < 30; ++i) {
    p[i] = u(rng);
    g[i] = i % 3 == 0 ? 1 : 0;
  }
  const auto r = tversky_loss<double>(p, g, 0.3, 0.7, 1.0, true);
  for (std::size_t i = 0; i < 30; ++i) {
    auto a = p, b = p;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const double fd = (tversky_loss_value<double>(a, g, 0.3, 0.7) - tversky_loss_value<double>(b, g, 0.3, 0.7)) / 2e-6;
    EXPECT_NEAR(r.grad[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Tversky, RejectsBadWeights) {
  std::vector<double> a = {0.5}, b = {1};
  EXPECT_THROW(tversky_loss_value<double>(a, b, 0.5, 0.6), InvalidArgument);
  EXPECT_THROW(tversky_loss_value<double>(a, b, -0.5, 1.5), InvalidArgument);
  std::vector<double> c = {0.5, 0.5};
  EXPECT_THROW(tversky_loss_value<double>(a, c, 0.5, 0.5), InvalidArgument);
}

TEST(Split, DisjointCoverAndDeterministic) {
  for (std::size_t n : {1u, 2u, 10u, 37u}) {
    const auto [tr, va] = train_val_split(n, 0.1, 5);
    std::set<std::size_t> all(tr.begin(), tr.end());
    for (auto i : va) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), n);
    if (n >= 2) {
      EXPECT_GE(va.size(), 1u);
    }
    EXPECT_GE(tr.size(), 1u);
    EXPECT_EQ(train_val_split(n, 0.1, 5), (std::pair{tr, va}));
  }
}

TEST(RMSprop, SingleStepMatchesReference) {
  nn::Param p;
  p.value = {1.0f, -2.0f};
  p.grad = {0.5f, 0.25f};
  TrainConfig c;
  c.lr = 0.01;
  c.weight_decay = 0.1;
  c.momentum = 0.9;
  RMSprop opt({&p}, c);
  opt.step();
  for (int i = 0; i < 2; ++i) {
    const double w0 = i == 0 ? 1.0 : -2.0, g0 = i == 0 ? 0.5 : 0.25;
    const double g = g0 + 0.1 * w0;
    const double v = 0.01 * g * g;
    const double w1 = w0 - 0.01 * g / (std::sqrt(v) + 1e-8);
    EXPECT_NEAR(p.value[static_cast<std::size_t>(i)], w1, 1e-6);
  }
}

TEST(Training, LossDecreasesOnLearnableTask) {
  const auto data = toy_data(16, 16, 16, 3);
  const auto ck = train(data, small_spec(), small_config(8));
  ASSERT_EQ(ck.history.size(), 8u);
  EXPECT_LT(ck.history.back().train_loss, ck.history.front().train_loss);
  EXPECT_GE(ck.best_epoch, 0);
  EXPECT_EQ(ck.n_train + ck.n_val, 16u);
}

TEST(Training, DeterministicGivenSeed) {
  const auto data = toy_data(8, 16, 16, 4);
  const auto a = train(data, small_spec(), small_config(2));
  const auto b = train(data, small_spec(), small_config(2));
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.fingerprint, b.fingerprint);
}

TEST(Training, RangeAuditRejectsFarSamples) {
  auto data = toy_data(4, 16, 16, 5);
  data[2].range_extent = 40;
  EXPECT_THROW(train(data, small_spec(), small_config(1)), InvalidArgument);
  std::size_t audited = 0;
  TrainHooks hooks;
  hooks.audit = [&](std::size_t, const TrainingPair& p) {
    EXPECT_LE(p.range_extent, 16);
    ++audited;
  };
  data[2].range_extent = 16;
  const auto ck = train(data, small_spec(), small_config(2), hooks);
  EXPECT_EQ(audited, 2 * ck.n_train);
  EXPECT_THROW(train({}, small_spec(), small_config(1)), InsufficientData);
}

TEST(Training, NonFiniteInputAborts) {
  auto data = toy_data(4, 16, 16, 6);
  for (auto& d : data) d.input.data()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(data, small_spec(), small_config(3));
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 0);
  }
}

TEST(Checkpoint, RoundTripAndCorruption) {
  auto ck = train(toy_data(4, 16, 16, 7), small_spec(), small_config(1));
  ck.n_azimuth = 16;
  ck.range_resolution = 0.25;
  const auto path = scratch("m.ckpt");
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.buffers, ck.buffers);
  EXPECT_EQ(back.spec, ck.spec);
  EXPECT_EQ(back.best_epoch, ck.best_epoch);
  EXPECT_EQ(back.n_azimuth, 16);

  PolarGrid in(16, 24, 0.25);
  std::mt19937_64 rng(8);
  for (float& v : in.values.data()) v = static_cast<float>(rng() % 100) / 100.0f;
  EXPECT_EQ(predict(ck, in), predict(back, in));

  // Truncation and trailing bytes are both rejected.
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 3);
  EXPECT_THROW(load_checkpoint(path), ParseError);
  save_checkpoint(path, ck);
  std::ofstream(path, std::ios::binary | std::ios::app) << "x";
  EXPECT_THROW(load_checkpoint(path), ParseError);
  std::ofstream(path, std::ios::binary) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(path), ParseError);
  EXPECT_THROW(save_checkpoint(path, ModelCheckpoint{}), StateError);
}

TEST(Predictor, ChecksCalibrationAndKind) {
  auto ck = train(toy_data(4, 16, 16, 9), small_spec(), small_config(1));
  ck.n_azimuth = 16;
  ck.range_resolution = 0.25;
  Predictor p(ck);
  EXPECT_THROW(p.predict(PolarGrid(17, 16, 0.25)), InvalidArgument);
  EXPECT_THROW(p.predict(PolarGrid(16, 16, 0.2)), InvalidArgument);
  EXPECT_THROW(p.predict(PolarGrid(16, 16, 0.25, GridKind::probability)), InvalidArgument);
  const auto out = p.predict(PolarGrid(16, 5, 0.25));  // narrower than the net's minimum extent
  EXPECT_EQ(out.n_range(), 5);
  EXPECT_EQ(out.kind, GridKind::probability);
  for (float v : out.values.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_THROW(Predictor(ModelCheckpoint{}), StateError);
}
