#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/nn/layers.hpp"
#include "radocc/nn/tensor.hpp"

namespace radocc::nn {

enum class AzimuthPadding { circular, zero };
enum class Upsample { transpose, bilinear };

inline std::string_view to_string(AzimuthPadding p) { return p == AzimuthPadding::circular ? "circular" : "zero"; }
inline std::string_view to_string(Upsample u) { return u == Upsample::transpose ? "transpose" : "bilinear"; }

inline AzimuthPadding azimuth_padding_from_string(std::string_view s) {
  if (s == "circular") return AzimuthPadding::circular;
  if (s == "zero") return AzimuthPadding::zero;
  throw InvalidArgument("unknown azimuth padding '" + std::string(s) + "'");
}

inline Upsample upsample_from_string(std::string_view s) {
  if (s == "transpose") return Upsample::transpose;
  if (s == "bilinear") return Upsample::bilinear;
  throw InvalidArgument("unknown upsample mode '" + std::string(s) + "'");
}

struct NetSpec {
  int depth = 4;
  int base_channels = 16;
  AzimuthPadding azimuth_padding = AzimuthPadding::circular;
  Upsample upsample = Upsample::transpose;
  int in_channels = 1;

  void validate() const {
    if (depth < 1) throw InvalidArgument("NetSpec: depth must be >= 1");
    if (base_channels < 1) throw InvalidArgument("NetSpec: base_channels must be >= 1");
    if (in_channels < 1) throw InvalidArgument("NetSpec: in_channels must be >= 1");
  }

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// (conv3x3 -> BN -> ReLU) x 2
class DoubleConv {
 public:
  DoubleConv() = default;
  DoubleConv(int cin, int cout, bool circular)
      : c1_(cin, cout, 3, circular), b1_(cout), c2_(cout, cout, 3, circular), b2_(cout) {}

  void init(std::mt19937_64& rng) {
    c1_.init(rng);
    c2_.init(rng);
  }

  Tensor forward(const Tensor& x, bool train) {
    Tensor y = r1_.forward(b1_.forward(c1_.forward(x, train), train), train);
    return r2_.forward(b2_.forward(c2_.forward(y, train), train), train);
  }

  Tensor backward(const Tensor& dy) {
    Tensor g = c2_.backward(b2_.backward(r2_.backward(dy)));
    return c1_.backward(b1_.backward(r1_.backward(g)));
  }

  void collect(std::vector<Param*>& params, std::vector<std::vector<float>*>& buffers) {
    for (Conv2d* c : {&c1_, &c2_}) {
      params.push_back(&c->weight());
      params.push_back(&c->bias());
    }
    for (BatchNorm2d* b : {&b1_, &b2_}) {
      params.push_back(&b->gamma());
      params.push_back(&b->beta());
      buffers.push_back(&b->running_mean());
      buffers.push_back(&b->running_var());
    }
  }

 private:
  Conv2d c1_;
  BatchNorm2d b1_;
  ReLU r1_;
  Conv2d c2_;
  BatchNorm2d b2_;
  ReLU r2_;
};

/// Decoder stage: upsample, pad to the skip's shape, concat [skip, up], DoubleConv.
class UpBlock {
 public:
  UpBlock() = default;
  UpBlock(int cin, int cskip, int cout, Upsample mode, bool circular) : mode_(mode), cskip_(cskip) {
    if (mode == Upsample::transpose) {
      tconv_ = ConvTranspose2x2(cin, cin / 2);
    } else {
      bilinear_ = UpsampleBilinear2(circular);
      reduce_ = Conv2d(cin, cin / 2, 1, circular);
    }
    conv_ = DoubleConv(cskip + cin / 2, cout, circular);
  }

  void init(std::mt19937_64& rng) {
    if (mode_ == Upsample::transpose)
      tconv_.init(rng);
    else
      reduce_.init(rng);
    conv_.init(rng);
  }

  Tensor forward(const Tensor& x, const Tensor& skip, bool train) {
    Tensor up = mode_ == Upsample::transpose ? tconv_.forward(x, train)
                                              : reduce_.forward(bilinear_.forward(x, train), train);
    up_h_ = up.h;
    up_w_ = up.w;
    return conv_.forward(concat(skip, pad_to(up, skip.h, skip.w)), train);
  }

  /// Returns (d input, d skip).
  std::pair<Tensor, Tensor> backward(const Tensor& dy) {
    auto [dskip, dup_padded] = split_channels(conv_.backward(dy), cskip_);
    Tensor dup = crop_from(dup_padded, up_h_, up_w_);
    Tensor dx = mode_ == Upsample::transpose ? tconv_.backward(dup) : bilinear_.backward(reduce_.backward(dup));
    return {std::move(dx), std::move(dskip)};
  }

  void collect(std::vector<Param*>& params, std::vector<std::vector<float>*>& buffers) {
    if (mode_ == Upsample::transpose) {
      params.push_back(&tconv_.weight());
      params.push_back(&tconv_.bias());
    } else {
      params.push_back(&reduce_.weight());
      params.push_back(&reduce_.bias());
    }
    conv_.collect(params, buffers);
  }

 private:
  Upsample mode_ = Upsample::transpose;
  int cskip_ = 0;
  ConvTranspose2x2 tconv_;
  UpsampleBilinear2 bilinear_;
  Conv2d reduce_;
  DoubleConv conv_;
  int up_h_ = 0, up_w_ = 0;
};

/// U-Net producing one logit channel with the same spatial size as the input.
class UNet {
 public:
  UNet(const NetSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec.validate();
    const bool circ = spec.azimuth_padding == AzimuthPadding::circular;
    const int b = spec.base_channels;
    inc_ = DoubleConv(spec.in_channels, b, circ);
    for (int l = 0; l < spec.depth; ++l) {
      downs_.emplace_back(b << l, b << (l + 1), circ);
      pools_.emplace_back();
    }
    for (int l = spec.depth; l >= 1; --l) ups_.emplace_back(b << l, b << (l - 1), b << (l - 1), spec.upsample, circ);
    outc_ = Conv2d(b, 1, 1, circ);

    std::mt19937_64 rng(seed);
    inc_.init(rng);
    for (auto& d : downs_) d.init(rng);
    for (auto& u : ups_) u.init(rng);
    outc_.init(rng);

    inc_.collect(params_, buffers_);
    for (auto& d : downs_) d.collect(params_, buffers_);
    for (auto& u : ups_) u.collect(params_, buffers_);
    params_.push_back(&outc_.weight());
    params_.push_back(&outc_.bias());
  }

  UNet(const UNet&) = delete;
  UNet& operator=(const UNet&) = delete;

  const NetSpec& spec() const { return spec_; }
  const std::vector<Param*>& params() const { return params_; }
  const std::vector<std::vector<float>*>& buffers() const { return buffers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Param* p : params_) n += p->value.size();
    return n;
  }

  /// Smallest input height/width the encoder can pool `depth` times.
  int min_extent() const { return 1 << spec_.depth; }

  Tensor forward(const Tensor& x, bool train) {
    if (x.c != spec_.in_channels) throw InvalidArgument("UNet: input channel mismatch");
    if (x.h < min_extent() || x.w < min_extent())
      throw InvalidArgument("UNet: input " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                            " smaller than 2^depth = " + std::to_string(min_extent()));
    std::vector<Tensor> skips;
    skips.reserve(static_cast<std::size_t>(spec_.depth) + 1);
    skips.push_back(inc_.forward(x, train));
    for (int l = 0; l < spec_.depth; ++l)
      skips.push_back(downs_[l].forward(pools_[l].forward(skips.back(), train), train));
    Tensor y = std::move(skips.back());
    for (int l = 0; l < spec_.depth; ++l) y = ups_[l].forward(y, skips[spec_.depth - 1 - l], train);
    return outc_.forward(y, train);
  }

  /// Back-propagates d loss / d logits, accumulating parameter gradients.
  void backward(const Tensor& dlogits) {
    Tensor g = outc_.backward(dlogits);
    std::vector<Tensor> dskips(static_cast<std::size_t>(spec_.depth));
    for (int l = spec_.depth - 1; l >= 0; --l) {
      auto [dx, dskip] = ups_[l].backward(g);
      g = std::move(dx);
      dskips[spec_.depth - 1 - l] = std::move(dskip);
    }
    for (int l = spec_.depth - 1; l >= 0; --l) {
      Tensor d = pools_[l].backward(downs_[l].backward(g));
      add_inplace(d, dskips[l]);
      g = std::move(d);
    }
    inc_.backward(g);
  }

  void zero_grad() {
    for (Param* p : params_) p->zero_grad();
  }

 private:
  static void add_inplace(Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
  }

  NetSpec spec_;
  DoubleConv inc_;
  std::vector<DoubleConv> downs_;
  std::vector<MaxPool2> pools_;
  std::vector<UpBlock> ups_;
  Conv2d outc_;
  std::vector<Param*> params_;
  std::vector<std::vector<float>*> buffers_;
};

inline float sigmoid(float z) { return 1.0f / (1.0f + std::exp(-z)); }

}  // namespace radocc::nn
