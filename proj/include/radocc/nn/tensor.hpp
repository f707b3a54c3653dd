#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "radocc/error.hpp"

namespace radocc::nn {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Eigen peels unaligned heads off vectorized reductions, so the summation order
// depends on where a buffer lands. Aligned storage keeps training bit-reproducible.
using Buffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense NCHW float tensor.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  Buffer data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f) : n(n_), c(c_), h(h_), w(w_) {
    data.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }

  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::size_t image_size() const { return static_cast<std::size_t>(c) * plane(); }
  std::size_t size() const { return data.size(); }

  float* image(int i) { return data.data() + static_cast<std::size_t>(i) * image_size(); }
  const float* image(int i) const { return data.data() + static_cast<std::size_t>(i) * image_size(); }
  float* channel(int i, int ch) { return image(i) + static_cast<std::size_t>(ch) * plane(); }
  const float* channel(int i, int ch) const { return image(i) + static_cast<std::size_t>(ch) * plane(); }

  float& at(int i, int ch, int y, int x) { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }
  float at(int i, int ch, int y, int x) const { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Trainable parameter block with its gradient accumulator.
struct Param {
  std::vector<float> value;
  std::vector<float> grad;

  void resize(std::size_t n) {
    value.assign(n, 0.0f);
    grad.assign(n, 0.0f);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

}  // namespace radocc::nn
