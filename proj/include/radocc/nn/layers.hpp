#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "radocc/nn/tensor.hpp"

namespace radocc::nn {

inline float he_normal(std::mt19937_64& rng, double stddev) {
  // Box-Muller on the raw generator output keeps initialization identical
  // across standard library implementations.
  const double u1 = std::max((rng() >> 11) * 0x1.0p-53, 1e-300);
  const double u2 = (rng() >> 11) * 0x1.0p-53;
  return static_cast<float>(stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2));
}

/// Per-thread scratch shared by all layers. Every user overwrites what it reads,
/// and per-layer buffers would hold gigabytes at full sensor resolution.
inline Buffer& scratch(int slot) {
  thread_local Buffer bufs[2];
  return bufs[slot];
}

/// k x k convolution, stride 1, "same" padding. Rows (azimuth) wrap around
/// when `circular_rows` is set; columns (range) are zero padded.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int cin, int cout, int k, bool circular_rows) : cin_(cin), cout_(cout), k_(k), circular_(circular_rows) {
    weight_.resize(static_cast<std::size_t>(cout) * cin * k * k);
    bias_.resize(static_cast<std::size_t>(cout));
  }

  void init(std::mt19937_64& rng) {
    const double stddev = std::sqrt(2.0 / (cin_ * k_ * k_));
    for (float& v : weight_.value) v = he_normal(rng, stddev);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
  }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  /// Largest im2col matrix, in floats; larger inputs are processed in row blocks.
  void set_column_cap(std::size_t floats) { column_cap_ = std::max<std::size_t>(floats, 1); }

  Tensor forward(const Tensor& x, bool train) {
    if (x.c != cin_) throw InvalidArgument("Conv2d: channel mismatch");
    Tensor y(x.n, cout_, x.h, x.w);
    const int hw = x.h * x.w;
    const int kk = cin_ * k_ * k_;
    ConstMapRM wmat(weight_.value.data(), cout_, kk);
    Eigen::Map<const Eigen::VectorXf> b(bias_.value.data(), cout_);
    const int rows = chunk_rows(x.h, x.w);
    for (int i = 0; i < x.n; ++i) {
      MapRM ymat(y.image(i), cout_, hw);
      for (int y0 = 0; y0 < x.h; y0 += rows) {
        const int y1 = std::min(x.h, y0 + rows), n = (y1 - y0) * x.w;
        ConstMapRM cmat(column_buffer(x.image(i), x.h, x.w, y0, y1), kk, n);
        ymat.middleCols(y0 * x.w, n).noalias() = wmat * cmat;
      }
      ymat.colwise() += b;
    }
    if (train) input_ = x;
    return y;
  }

  Tensor backward(const Tensor& dy) {
    const Tensor& x = input_;
    Tensor dx(x.n, cin_, x.h, x.w);
    const int hw = x.h * x.w;
    const int kk = cin_ * k_ * k_;
    ConstMapRM wmat(weight_.value.data(), cout_, kk);
    MapRM dw(weight_.grad.data(), cout_, kk);
    Eigen::Map<Eigen::VectorXf> db(bias_.grad.data(), cout_);
    const int rows = chunk_rows(x.h, x.w);
    for (int i = 0; i < x.n; ++i) {
      ConstMapRM dymat(dy.image(i), cout_, hw);
      db += dymat.rowwise().sum();
      for (int y0 = 0; y0 < x.h; y0 += rows) {
        const int y1 = std::min(x.h, y0 + rows), n = (y1 - y0) * x.w;
        ConstMapRM cmat(column_buffer(x.image(i), x.h, x.w, y0, y1), kk, n);
        const auto dyblk = dymat.middleCols(y0 * x.w, n);
        dw.noalias() += dyblk * cmat.transpose();
        if (k_ == 1) {
          MapRM dxmat(dx.image(i), cin_, hw);
          dxmat.middleCols(y0 * x.w, n).noalias() = wmat.transpose() * dyblk;
        } else {
          Buffer& dcol = scratch(1);
          dcol.resize(static_cast<std::size_t>(kk) * n);
          MapRM dcmat(dcol.data(), kk, n);
          dcmat.noalias() = wmat.transpose() * dyblk;
          col2im(dcol.data(), x.h, x.w, y0, y1, dx.image(i));
        }
      }
    }
    return dx;
  }

 private:
  // Output rows per im2col block; one block unless the column matrix would pass the cap.
  int chunk_rows(int h, int w) const {
    if (k_ == 1) return h;
    const std::size_t per_row = static_cast<std::size_t>(cin_) * k_ * k_ * w;
    return static_cast<int>(std::clamp<std::size_t>(column_cap_ / per_row, 1, static_cast<std::size_t>(h)));
  }

  const float* column_buffer(const float* img, int h, int w, int y0, int y1) {
    if (k_ == 1) return img;
    Buffer& col = scratch(0);
    col.resize(static_cast<std::size_t>(cin_) * k_ * k_ * (y1 - y0) * w);
    im2col(img, h, w, y0, y1, col.data());
    return col.data();
  }

  int source_row(int y, int h) const {
    if (circular_) return ((y % h) + h) % h;
    return (y < 0 || y >= h) ? -1 : y;
  }

  void im2col(const float* img, int h, int w, int y0, int y1, float* col) const {
    const int pad = k_ / 2;
    std::size_t idx = 0;
    for (int ci = 0; ci < cin_; ++ci) {
      const float* plane = img + static_cast<std::size_t>(ci) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const int dx = kx - pad;
          const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
          for (int y = y0; y < y1; ++y, idx += static_cast<std::size_t>(w)) {
            float* out = col + idx;
            const int sy = source_row(y + ky - pad, h);
            if (sy < 0) {
              std::fill(out, out + w, 0.0f);
              continue;
            }
            const float* src = plane + static_cast<std::size_t>(sy) * w;
            std::fill(out, out + x_lo, 0.0f);
            std::copy(src + x_lo + dx, src + x_hi + dx, out + x_lo);
            std::fill(out + x_hi, out + w, 0.0f);
          }
        }
      }
    }
  }

  void col2im(const float* col, int h, int w, int y0, int y1, float* img) const {
    const int pad = k_ / 2;
    std::size_t idx = 0;
    for (int ci = 0; ci < cin_; ++ci) {
      float* plane = img + static_cast<std::size_t>(ci) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const int dx = kx - pad;
          const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
          for (int y = y0; y < y1; ++y, idx += static_cast<std::size_t>(w)) {
            const int sy = source_row(y + ky - pad, h);
            if (sy < 0) continue;
            const float* in = col + idx;
            float* dst = plane + static_cast<std::size_t>(sy) * w;
            for (int x = x_lo; x < x_hi; ++x) dst[x + dx] += in[x];
          }
        }
      }
    }
  }

  int cin_ = 0, cout_ = 0, k_ = 3;
  bool circular_ = false;
  std::size_t column_cap_ = std::size_t{64} << 20;
  Param weight_, bias_;
  Tensor input_;
};

/// Per-channel batch normalization with running statistics for inference.
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int c) : c_(c) {
    gamma_.resize(static_cast<std::size_t>(c));
    beta_.resize(static_cast<std::size_t>(c));
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
    running_mean_.assign(static_cast<std::size_t>(c), 0.0f);
    running_var_.assign(static_cast<std::size_t>(c), 1.0f);
  }

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }
  std::vector<float>& running_mean() { return running_mean_; }
  std::vector<float>& running_var() { return running_var_; }

  Tensor forward(const Tensor& x, bool train) {
    Tensor y(x.n, x.c, x.h, x.w);
    const std::size_t plane = x.plane();
    const double m = static_cast<double>(x.n) * static_cast<double>(plane);
    if (train) {
      xhat_ = Tensor(x.n, x.c, x.h, x.w);
      inv_std_.assign(static_cast<std::size_t>(c_), 0.0f);
    }
    for (int ch = 0; ch < c_; ++ch) {
      double mean = 0.0, var = 0.0;
      if (train) {
        for (int i = 0; i < x.n; ++i) {
          const float* p = x.channel(i, ch);
          for (std::size_t j = 0; j < plane; ++j) mean += p[j];
        }
        mean /= m;
        for (int i = 0; i < x.n; ++i) {
          const float* p = x.channel(i, ch);
          for (std::size_t j = 0; j < plane; ++j) {
            const double d = p[j] - mean;
            var += d * d;
          }
        }
        var /= m;
        const double unbiased = m > 1 ? var * m / (m - 1) : var;
        running_mean_[ch] = static_cast<float>((1 - kMomentum) * running_mean_[ch] + kMomentum * mean);
        running_var_[ch] = static_cast<float>((1 - kMomentum) * running_var_[ch] + kMomentum * unbiased);
      } else {
        mean = running_mean_[ch];
        var = running_var_[ch];
      }
      const float inv = static_cast<float>(1.0 / std::sqrt(var + kEps));
      const float g = gamma_.value[ch], b = beta_.value[ch], mu = static_cast<float>(mean);
      if (train) inv_std_[ch] = inv;
      for (int i = 0; i < x.n; ++i) {
        const float* p = x.channel(i, ch);
        float* q = y.channel(i, ch);
        float* xh = train ? xhat_.channel(i, ch) : nullptr;
        for (std::size_t j = 0; j < plane; ++j) {
          const float n = (p[j] - mu) * inv;
          if (xh) xh[j] = n;
          q[j] = g * n + b;
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t plane = dy.plane();
    const double m = static_cast<double>(dy.n) * static_cast<double>(plane);
    for (int ch = 0; ch < c_; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < dy.n; ++i) {
        const float* g = dy.channel(i, ch);
        const float* xh = xhat_.channel(i, ch);
        for (std::size_t j = 0; j < plane; ++j) {
          sum_dy += g[j];
          sum_dy_xhat += static_cast<double>(g[j]) * xh[j];
        }
      }
      gamma_.grad[ch] += static_cast<float>(sum_dy_xhat);
      beta_.grad[ch] += static_cast<float>(sum_dy);
      const double scale = gamma_.value[ch] * inv_std_[ch];
      const double mean_dy = sum_dy / m, mean_dy_xhat = sum_dy_xhat / m;
      for (int i = 0; i < dy.n; ++i) {
        const float* g = dy.channel(i, ch);
        const float* xh = xhat_.channel(i, ch);
        float* o = dx.channel(i, ch);
        for (std::size_t j = 0; j < plane; ++j)
          o[j] = static_cast<float>(scale * (g[j] - mean_dy - xh[j] * mean_dy_xhat));
      }
    }
    return dx;
  }

 private:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;
  int c_ = 0;
  Param gamma_, beta_;
  std::vector<float> running_mean_, running_var_;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x, bool train) {
    Tensor y = x;
    for (float& v : y.data) v = v < 0.0f ? 0.0f : v;  // NaN passes through
    if (train) output_ = y;
    return y;
  }
  Tensor backward(const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (output_.data[i] <= 0.0f) dx.data[i] = 0.0f;
    return dx;
  }

 private:
  Tensor output_;
};

/// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
class MaxPool2 {
 public:
  Tensor forward(const Tensor& x, bool train) {
    const int oh = x.h / 2, ow = x.w / 2;
    if (oh == 0 || ow == 0) throw InvalidArgument("MaxPool2: input too small for network depth");
    Tensor y(x.n, x.c, oh, ow);
    if (train) {
      argmax_.assign(y.size(), 0);
      in_h_ = x.h;
      in_w_ = x.w;
    }
    std::size_t o = 0;
    for (int i = 0; i < x.n; ++i)
      for (int ch = 0; ch < x.c; ++ch) {
        const float* p = x.channel(i, ch);
        for (int yy = 0; yy < oh; ++yy)
          for (int xx = 0; xx < ow; ++xx, ++o) {
            int best = (2 * yy) * x.w + 2 * xx;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const int idx = (2 * yy + dy) * x.w + 2 * xx + dx;
                if (p[idx] > p[best] || std::isnan(p[idx])) best = idx;
              }
            y.data[o] = p[best];
            if (train) argmax_[o] = best;
          }
      }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, in_h_, in_w_);
    std::size_t o = 0;
    for (int i = 0; i < dy.n; ++i)
      for (int ch = 0; ch < dy.c; ++ch) {
        float* p = dx.channel(i, ch);
        for (std::size_t j = 0; j < dy.plane(); ++j, ++o) p[argmax_[o]] += dy.data[o];
      }
    return dx;
  }

 private:
  std::vector<int> argmax_;
  int in_h_ = 0, in_w_ = 0;
};

/// 2x2 transposed convolution with stride 2 (doubles both spatial axes).
class ConvTranspose2x2 {
 public:
  ConvTranspose2x2() = default;
  ConvTranspose2x2(int cin, int cout) : cin_(cin), cout_(cout) {
    weight_.resize(static_cast<std::size_t>(cin) * cout * 4);
    bias_.resize(static_cast<std::size_t>(cout));
  }

  void init(std::mt19937_64& rng) {
    const double stddev = std::sqrt(2.0 / (cin_ * 4.0));
    for (float& v : weight_.value) v = he_normal(rng, stddev);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
  }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

  Tensor forward(const Tensor& x, bool train) {
    Tensor y(x.n, cout_, 2 * x.h, 2 * x.w);
    const int hw = x.h * x.w;
    ConstMapRM wmat(weight_.value.data(), cin_, cout_ * 4);
    Buffer& z = scratch(0);
    z.resize(static_cast<std::size_t>(cout_) * 4 * hw);
    for (int i = 0; i < x.n; ++i) {
      ConstMapRM xmat(x.image(i), cin_, hw);
      MapRM zmat(z.data(), cout_ * 4, hw);
      zmat.noalias() = wmat.transpose() * xmat;
      for (int co = 0; co < cout_; ++co) {
        float* out = y.channel(i, co);
        const float b = bias_.value[co];
        for (int a = 0; a < 2; ++a)
          for (int bb = 0; bb < 2; ++bb) {
            const float* zr = z.data() + static_cast<std::size_t>(co * 4 + a * 2 + bb) * hw;
            for (int yy = 0; yy < x.h; ++yy)
              for (int xx = 0; xx < x.w; ++xx)
                out[static_cast<std::size_t>(2 * yy + a) * y.w + 2 * xx + bb] = zr[yy * x.w + xx] + b;
          }
      }
    }
    if (train) input_ = x;
    return y;
  }

  Tensor backward(const Tensor& dy) {
    const Tensor& x = input_;
    Tensor dx(x.n, cin_, x.h, x.w);
    const int hw = x.h * x.w;
    ConstMapRM wmat(weight_.value.data(), cin_, cout_ * 4);
    MapRM dw(weight_.grad.data(), cin_, cout_ * 4);
    Buffer& z = scratch(0);
    z.resize(static_cast<std::size_t>(cout_) * 4 * hw);
    for (int i = 0; i < x.n; ++i) {
      for (int co = 0; co < cout_; ++co) {
        const float* g = dy.channel(i, co);
        double bsum = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int bb = 0; bb < 2; ++bb) {
            float* zr = z.data() + static_cast<std::size_t>(co * 4 + a * 2 + bb) * hw;
            for (int yy = 0; yy < x.h; ++yy)
              for (int xx = 0; xx < x.w; ++xx) {
                const float v = g[static_cast<std::size_t>(2 * yy + a) * dy.w + 2 * xx + bb];
                zr[yy * x.w + xx] = v;
                bsum += v;
              }
          }
        bias_.grad[co] += static_cast<float>(bsum);
      }
      ConstMapRM zmat(z.data(), cout_ * 4, hw);
      ConstMapRM xmat(x.image(i), cin_, hw);
      dw.noalias() += xmat * zmat.transpose();
      MapRM dxmat(dx.image(i), cin_, hw);
      dxmat.noalias() = wmat * zmat;
    }
    return dx;
  }

 private:
  int cin_ = 0, cout_ = 0;
  Param weight_, bias_;
  Tensor input_;
};

/// Bilinear 2x upsampling with half-pixel centres. Rows wrap when
/// `circular_rows` is set; otherwise edges are clamped.
class UpsampleBilinear2 {
 public:
  UpsampleBilinear2() = default;
  explicit UpsampleBilinear2(bool circular_rows) : circular_(circular_rows) {}

  Tensor forward(const Tensor& x, bool train) {
    Tensor y(x.n, x.c, 2 * x.h, 2 * x.w);
    if (train) {
      in_h_ = x.h;
      in_w_ = x.w;
    }
    for (int i = 0; i < x.n; ++i)
      for (int ch = 0; ch < x.c; ++ch) {
        const float* p = x.channel(i, ch);
        float* q = y.channel(i, ch);
        for (int yy = 0; yy < y.h; ++yy) {
          const auto [y0, y1, fy] = coord(yy, x.h, circular_);
          for (int xx = 0; xx < y.w; ++xx) {
            const auto [x0, x1, fx] = coord(xx, x.w, false);
            const float a = p[y0 * x.w + x0] * (1 - fx) + p[y0 * x.w + x1] * fx;
            const float b = p[y1 * x.w + x0] * (1 - fx) + p[y1 * x.w + x1] * fx;
            q[static_cast<std::size_t>(yy) * y.w + xx] = a * (1 - fy) + b * fy;
          }
        }
      }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, in_h_, in_w_);
    for (int i = 0; i < dy.n; ++i)
      for (int ch = 0; ch < dy.c; ++ch) {
        const float* g = dy.channel(i, ch);
        float* p = dx.channel(i, ch);
        for (int yy = 0; yy < dy.h; ++yy) {
          const auto [y0, y1, fy] = coord(yy, in_h_, circular_);
          for (int xx = 0; xx < dy.w; ++xx) {
            const auto [x0, x1, fx] = coord(xx, in_w_, false);
            const float v = g[static_cast<std::size_t>(yy) * dy.w + xx];
            p[y0 * in_w_ + x0] += v * (1 - fy) * (1 - fx);
            p[y0 * in_w_ + x1] += v * (1 - fy) * fx;
            p[y1 * in_w_ + x0] += v * fy * (1 - fx);
            p[y1 * in_w_ + x1] += v * fy * fx;
          }
        }
      }
    return dx;
  }

 private:
  struct Coord {
    int i0, i1;
    float f;
  };
  static Coord coord(int o, int n, bool wrap) {
    const float s = (o + 0.5f) / 2.0f - 0.5f;
    const int fl = static_cast<int>(std::floor(s));
    if (wrap) return {(fl % n + n) % n, ((fl + 1) % n + n) % n, s - fl};
    if (s <= 0.0f) return {0, 0, 0.0f};
    const int i0 = std::min(fl, n - 1);
    return {i0, std::min(i0 + 1, n - 1), s - fl};
  }
  bool circular_ = false;
  int in_h_ = 0, in_w_ = 0;
};

/// Zero-pads `x` (centred) to h x w; the upsampled decoder path can be one
/// row/column short of its skip connection after odd-sized pooling.
inline Tensor pad_to(const Tensor& x, int h, int w) {
  if (x.h == h && x.w == w) return x;
  Tensor y(x.n, x.c, h, w);
  const int top = (h - x.h) / 2, left = (w - x.w) / 2;
  for (int i = 0; i < x.n; ++i)
    for (int ch = 0; ch < x.c; ++ch)
      for (int yy = 0; yy < x.h; ++yy)
        std::copy(x.channel(i, ch) + static_cast<std::size_t>(yy) * x.w,
                  x.channel(i, ch) + static_cast<std::size_t>(yy + 1) * x.w,
                  y.channel(i, ch) + static_cast<std::size_t>(yy + top) * w + left);
  return y;
}

inline Tensor crop_from(const Tensor& y, int h, int w) {
  if (y.h == h && y.w == w) return y;
  Tensor x(y.n, y.c, h, w);
  const int top = (y.h - h) / 2, left = (y.w - w) / 2;
  for (int i = 0; i < y.n; ++i)
    for (int ch = 0; ch < y.c; ++ch)
      for (int yy = 0; yy < h; ++yy)
        std::copy(y.channel(i, ch) + static_cast<std::size_t>(yy + top) * y.w + left,
                  y.channel(i, ch) + static_cast<std::size_t>(yy + top) * y.w + left + w,
                  x.channel(i, ch) + static_cast<std::size_t>(yy) * w);
  return x;
}

/// Channel concatenation [a, b].
inline Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy(a.image(i), a.image(i) + a.image_size(), y.image(i));
    std::copy(b.image(i), b.image(i) + b.image_size(), y.image(i) + a.image_size());
  }
  return y;
}

inline std::pair<Tensor, Tensor> split_channels(const Tensor& y, int ca) {
  Tensor a(y.n, ca, y.h, y.w), b(y.n, y.c - ca, y.h, y.w);
  for (int i = 0; i < y.n; ++i) {
    std::copy(y.image(i), y.image(i) + a.image_size(), a.image(i));
    std::copy(y.image(i) + a.image_size(), y.image(i) + y.image_size(), b.image(i));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace radocc::nn
