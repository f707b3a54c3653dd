#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "radocc/nn/unet.hpp"

using namespace radocc::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor t(n, c, h, w);
  for (float& v : t.data) v = u(rng);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a.data[i]) * b.data[i];
  return s;
}

// Direct nested-loop convolution used as the oracle for the im2col path.
Tensor direct_conv(const Tensor& x, const std::vector<float>& w, const std::vector<float>& b, int cout, int k,
                   bool circular) {
  Tensor y(x.n, cout, x.h, x.w);
  const int pad = k / 2;
  for (int i = 0; i < x.n; ++i)
    for (int co = 0; co < cout; ++co)
      for (int yy = 0; yy < x.h; ++yy)
        for (int xx = 0; xx < x.w; ++xx) {
          double s = b[co];
          for (int ci = 0; ci < x.c; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                int sy = yy + ky - pad;
                const int sx = xx + kx - pad;
                if (circular) sy = (sy % x.h + x.h) % x.h;
                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                s += static_cast<double>(w[((co * x.c + ci) * k + ky) * k + kx]) * x.at(i, ci, sy, sx);
              }
          y.at(i, co, yy, xx) = static_cast<float>(s);
        }
  return y;
}

// Checks analytic input and parameter gradients of L = <r, f(x)> against
// central differences.
void check_gradients(const std::function<Tensor(const Tensor&)>& fwd, const std::function<Tensor(const Tensor&)>& bwd,
                     Tensor x, const std::vector<Param*>& params, double eps, double tol, std::mt19937_64& rng) {
  Tensor y = fwd(x);
  const Tensor r = random_tensor(y.n, y.c, y.h, y.w, rng);
  for (Param* p : params) p->zero_grad();
  const Tensor dx = bwd(r);
  auto loss = [&](const Tensor& in) { return dot(fwd(in), r); };
  std::uniform_int_distribution<std::size_t> pick_x(0, x.size() - 1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t i = pick_x(rng);
    const float orig = x.data[i];
    x.data[i] = orig + static_cast<float>(eps);
    const double lp = loss(x);
    x.data[i] = orig - static_cast<float>(eps);
    const double lm = loss(x);
    x.data[i] = orig;
    const double fd = (lp - lm) / (2 * eps);
    EXPECT_NEAR(dx.data[i], fd, tol * std::max(1.0, std::abs(fd))) << "input index " << i;
  }
  for (Param* p : params) {
    std::uniform_int_distribution<std::size_t> pick(0, p->value.size() - 1);
    for (int t = 0; t < 5; ++t) {
      const std::size_t i = pick(rng);
      const float orig = p->value[i];
      p->value[i] = orig + static_cast<float>(eps);
      const double lp = loss(x);
      p->value[i] = orig - static_cast<float>(eps);
      const double lm = loss(x);
      p->value[i] = orig;
      const double fd = (lp - lm) / (2 * eps);
      EXPECT_NEAR(p->grad[i], fd, tol * std::max(1.0, std::abs(fd))) << "param index " << i;
    }
  }
}

}  // namespace

TEST(Conv2d, MatchesDirectConvolution) {
  std::mt19937_64 rng(1);
  for (bool circ : {false, true})
    for (int k : {1, 3}) {
      Conv2d conv(3, 4, k, circ);
      conv.init(rng);
      for (float& v : conv.bias().value) v = 0.1f;
      const Tensor x = random_tensor(2, 3, 7, 5, rng);
      const Tensor y = conv.forward(x, false);
      const Tensor ref = direct_conv(x, conv.weight().value, conv.bias().value, 4, k, circ);
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data[i], ref.data[i], 1e-5);
    }
}

TEST(Conv2d, RowBlocksMatchSingleBlock) {
  std::mt19937_64 rng(3);
  for (bool circ : {false, true})
    for (std::size_t rows : {1u, 2u, 3u}) {
      Conv2d a(3, 4, 3, circ);
      a.init(rng);
      Conv2d b = a;
      b.set_column_cap(rows * 3 * 9 * 5);
      const Tensor x = random_tensor(2, 3, 7, 5, rng);
      const Tensor g = random_tensor(2, 4, 7, 5, rng);
      const Tensor ya = a.forward(x, true), yb = b.forward(x, true);
      for (std::size_t i = 0; i < ya.size(); ++i) EXPECT_NEAR(ya.data[i], yb.data[i], 1e-5);
      a.weight().zero_grad();
      b.weight().zero_grad();
      a.bias().zero_grad();
      b.bias().zero_grad();
      const Tensor da = a.backward(g), db = b.backward(g);
      for (std::size_t i = 0; i < da.size(); ++i) EXPECT_NEAR(da.data[i], db.data[i], 1e-5);
      for (std::size_t i = 0; i < a.weight().grad.size(); ++i)
        EXPECT_NEAR(a.weight().grad[i], b.weight().grad[i], 1e-4);
      EXPECT_EQ(a.bias().grad, b.bias().grad);
    }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (bool circ : {false, true}) {
    Conv2d conv(2, 3, 3, circ);
    conv.init(rng);
    check_gradients([&](const Tensor& in) { return conv.forward(in, true); },
                    [&](const Tensor& g) { return conv.backward(g); }, random_tensor(2, 2, 6, 5, rng),
                    {&conv.weight(), &conv.bias()}, 1e-2, 2e-3, rng);
  }
}

TEST(BatchNorm2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  BatchNorm2d bn(3);
  for (float& v : bn.gamma().value) v = 1.5f;
  check_gradients([&](const Tensor& in) { return bn.forward(in, true); },
                  [&](const Tensor& g) { return bn.backward(g); }, random_tensor(2, 3, 4, 4, rng),
                  {&bn.gamma(), &bn.beta()}, 1e-2, 5e-3, rng);
}

TEST(BatchNorm2d, EvalUsesRunningStatistics) {
  BatchNorm2d bn(1);
  Tensor x(1, 1, 2, 2);
  x.data = {1, 2, 3, 4};
  bn.forward(x, true);
  EXPECT_NEAR(bn.running_mean()[0], 0.25f, 1e-6);
  // unbiased variance of {1,2,3,4} is 5/3
  EXPECT_NEAR(bn.running_var()[0], 0.9f + 0.1f * 5.0f / 3.0f, 1e-6);
  const Tensor y = bn.forward(x, false);
  EXPECT_NEAR(y.data[0], (1 - 0.25f) / std::sqrt(bn.running_var()[0] + 1e-5f), 1e-5);
}

TEST(ConvTranspose2x2, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  ConvTranspose2x2 t(3, 2);
  t.init(rng);
  check_gradients([&](const Tensor& in) { return t.forward(in, true); },
                  [&](const Tensor& g) { return t.backward(g); }, random_tensor(2, 3, 3, 4, rng),
                  {&t.weight(), &t.bias()}, 1e-2, 2e-3, rng);
}

TEST(UpsampleBilinear2, AdjointOfForward) {
  std::mt19937_64 rng(5);
  for (bool circ : {false, true}) {
    UpsampleBilinear2 up(circ);
    const Tensor x = random_tensor(1, 2, 3, 5, rng);
    const Tensor y = up.forward(x, true);
    const Tensor r = random_tensor(y.n, y.c, y.h, y.w, rng);
    EXPECT_NEAR(dot(y, r), dot(x, up.backward(r)), 1e-4);
  }
}

TEST(UpsampleBilinear2, ConstantStaysConstant) {
  UpsampleBilinear2 up;
  const Tensor y = up.forward(Tensor(1, 1, 3, 3, 0.7f), false);
  for (float v : y.data) EXPECT_FLOAT_EQ(v, 0.7f);
}

TEST(MaxPool2, RoutesGradientToArgmax) {
  MaxPool2 pool;
  Tensor x(1, 1, 3, 3);
  x.data = {1, 5, 0, 2, 3, 0, 9, 9, 9};
  const Tensor y = pool.forward(x, true);
  ASSERT_EQ(y.h, 1);
  ASSERT_EQ(y.w, 1);
  EXPECT_EQ(y.data[0], 5.0f);
  Tensor g(1, 1, 1, 1, 2.0f);
  const Tensor dx = pool.backward(g);
  EXPECT_EQ(dx.data[1], 2.0f);
  EXPECT_EQ(dx.data[0] + dx.data[2] + dx.data[3] + dx.data[4] + dx.data[8], 0.0f);
}

TEST(PadConcat, PadCropAndSplitAreInverse) {
  std::mt19937_64 rng(6);
  const Tensor a = random_tensor(2, 2, 3, 4, rng);
  const Tensor b = random_tensor(2, 3, 3, 4, rng);
  const auto [a2, b2] = split_channels(concat(a, b), 2);
  EXPECT_EQ(a2.data, a.data);
  EXPECT_EQ(b2.data, b.data);
  EXPECT_EQ(crop_from(pad_to(a, 5, 7), 3, 4).data, a.data);
}

class UNetTest : public ::testing::TestWithParam<Upsample> {};

TEST_P(UNetTest, OutputShapeMatchesInputForOddSizes) {
  NetSpec spec{.depth = 3, .base_channels = 2, .upsample = GetParam()};
  UNet net(spec, 7);
  std::mt19937_64 rng(7);
  for (auto [h, w] : {std::pair{16, 16}, {13, 21}, {24, 9}}) {
    const Tensor y = net.forward(random_tensor(2, 1, h, w, rng), false);
    EXPECT_EQ(y.h, h);
    EXPECT_EQ(y.w, w);
    EXPECT_EQ(y.c, 1);
  }
}

TEST_P(UNetTest, GradientsMatchFiniteDifferences) {
  NetSpec spec{.depth = 2, .base_channels = 2, .upsample = GetParam()};
  UNet net(spec, 8);
  std::mt19937_64 rng(8);
  // ReLU kinks and pooling switches make the full network only piecewise
  // smooth; layer-level checks above are the tight ones.
  Tensor x = random_tensor(2, 1, 8, 8, rng);
  Tensor y = net.forward(x, true);
  const Tensor r = random_tensor(y.n, y.c, y.h, y.w, rng);
  net.zero_grad();
  net.backward(r);
  int agree = 0, total = 0;
  for (Param* p : net.params()) {
    const std::size_t i = p->value.size() / 2;
    const float orig = p->value[i];
    const double eps = 1e-3;
    p->value[i] = orig + static_cast<float>(eps);
    const double lp = dot(net.forward(x, true), r);
    p->value[i] = orig - static_cast<float>(eps);
    const double lm = dot(net.forward(x, true), r);
    p->value[i] = orig;
    const double fd = (lp - lm) / (2 * eps);
    ++total;
    if (std::abs(p->grad[i] - fd) <= 5e-2 * std::max(1.0, std::abs(fd))) ++agree;
  }
  EXPECT_GE(agree * 10, total * 9) << agree << "/" << total;
}

TEST_P(UNetTest, RotationEquivariantWithCircularPadding) {
  NetSpec spec{.depth = 2, .base_channels = 4, .upsample = GetParam()};
  UNet net(spec, 9);
  std::mt19937_64 rng(9);
  Tensor x = random_tensor(1, 1, 32, 12, rng);
  for (int i = 0; i < 3; ++i) net.forward(x, true);  // move running stats off their defaults
  const Tensor y = net.forward(x, false);
  for (int k : {4, 8, 20}) {
    Tensor xr(1, 1, 32, 12);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 12; ++c) xr.at(0, 0, (r + k) % 32, c) = x.at(0, 0, r, c);
    const Tensor yr = net.forward(xr, false);
    double worst = 0;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 12; ++c)
        worst = std::max(worst, static_cast<double>(std::abs(sigmoid(yr.at(0, 0, (r + k) % 32, c)) -
                                                             sigmoid(y.at(0, 0, r, c)))));
    EXPECT_LT(worst, 1e-4) << "k=" << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, UNetTest, ::testing::Values(Upsample::transpose, Upsample::bilinear),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(UNet, RejectsTooSmallInput) {
  UNet net(NetSpec{.depth = 3, .base_channels = 2}, 1);
  EXPECT_THROW(net.forward(Tensor(1, 1, 4, 16), false), radocc::InvalidArgument);
}

TEST(UNet, InitializationIsSeedDeterministic) {
  UNet a(NetSpec{.depth = 2, .base_channels = 2}, 11), b(NetSpec{.depth = 2, .base_channels = 2}, 11);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i]->value, b.params()[i]->value);
}
