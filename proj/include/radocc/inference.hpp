#pragma once

#include <algorithm>
#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/grid_geometry.hpp"
#include "radocc/model.hpp"

namespace radocc {

enum class Combine { max, mean, or_binary };

inline std::string_view to_string(Combine c) {
  switch (c) {
    case Combine::max: return "max";
    case Combine::mean: return "mean";
    case Combine::or_binary: return "or_binary";
  }
  return "max";
}

inline Combine combine_from_string(std::string_view s) {
  if (s == "max") return Combine::max;
  if (s == "mean") return Combine::mean;
  if (s == "or_binary") return Combine::or_binary;
  throw InvalidArgument("unknown combine rule '" + std::string(s) + "'");
}

/// Range offsets of the sliding windows: 0, S, 2S, ... while the window fits,
/// plus a final window clamped to the end when bins would be left uncovered.
inline std::vector<int> window_offsets(int total_bins, int window_bins, int stride_bins) {
  if (window_bins <= 0) throw InvalidArgument("window_offsets: window must be positive");
  if (stride_bins <= 0 || stride_bins > window_bins)
    throw InvalidArgument("window_offsets: stride must lie in (0, window]");
  if (total_bins < window_bins)
    throw InvalidArgument("window_offsets: " + std::to_string(total_bins) + " bins is shorter than the window " +
                          std::to_string(window_bins));
  std::vector<int> out;
  int o = 0;
  for (; o + window_bins <= total_bins; o += stride_bins) out.push_back(o);
  if (out.back() + window_bins < total_bins) out.push_back(total_bins - window_bins);
  return out;
}

struct InferenceConfig {
  int window_bins = 300;
  int stride_bins = 60;
  Combine combine = Combine::max;
  float threshold = 0.5f;

  void validate() const {
    if (window_bins <= 0) throw InvalidArgument("InferenceConfig: window_bins must be positive");
    if (stride_bins <= 0 || stride_bins > window_bins)
      throw InvalidArgument("InferenceConfig: stride_bins must lie in (0, window_bins]");
    if (!(threshold >= 0.0f && threshold <= 1.0f)) throw InvalidArgument("InferenceConfig: threshold must lie in [0,1]");
  }
};

struct InferenceResult {
  PolarGrid probability;
  PolarGrid occupancy;
  std::vector<int> offsets;
};

/// Sliding-window inference with a near model for the window at offset 0 and
/// a far model for every other window. `near` and `far` may be the same object.
class SlidingWindowInference {
 public:
  SlidingWindowInference(Predictor& near, Predictor& far, InferenceConfig cfg) : near_(near), far_(far), cfg_(cfg) {
    cfg_.validate();
  }

  const InferenceConfig& config() const { return cfg_; }

  InferenceResult run(const PolarGrid& radar) {
    if (radar.kind != GridKind::power) throw InvalidArgument("sliding_window_infer: input must be a power grid");
    near_.check_calibration(radar);
    far_.check_calibration(radar);
    const std::vector<int> offsets = window_offsets(radar.n_range(), cfg_.window_bins, cfg_.stride_bins);
    const int n_az = radar.n_azimuth(), n_r = radar.n_range();

    std::vector<PolarGrid> windows;
    windows.reserve(offsets.size());
    for (int o : offsets) windows.push_back(crop_polar_range(radar, o, cfg_.window_bins));

    std::vector<Raster> probs(offsets.size());
    probs[0] = near_.predict(windows[0].values);
    if (offsets.size() > 1) {
      std::vector<const Raster*> far_inputs;
      for (std::size_t i = 1; i < windows.size(); ++i) far_inputs.push_back(&windows[i].values);
      // Batches of modest size keep peak memory flat on long frames.
      constexpr std::size_t kBatch = 8;
      for (std::size_t b = 0; b < far_inputs.size(); b += kBatch) {
        const std::size_t e = std::min(far_inputs.size(), b + kBatch);
        auto out = far_.predict(std::vector<const Raster*>(far_inputs.begin() + b, far_inputs.begin() + e));
        for (std::size_t i = b; i < e; ++i) probs[i + 1] = std::move(out[i - b]);
      }
    }

    InferenceResult res;
    res.offsets = offsets;
    res.probability = PolarGrid(n_az, n_r, radar.range_resolution, GridKind::probability);
    res.probability.range_offset = radar.range_offset;
    Image<int> cover(n_az, n_r, 0);
    for (std::size_t w = 0; w < offsets.size(); ++w) {
      const int o = offsets[w];
      for (int a = 0; a < n_az; ++a)
        for (int k = 0; k < cfg_.window_bins; ++k) {
          const float p = probs[w](a, k);
          float& dst = res.probability(a, o + k);
          switch (cfg_.combine) {
            case Combine::max: dst = std::max(dst, p); break;
            case Combine::mean: dst += p; break;
            case Combine::or_binary: dst = std::max(dst, p >= cfg_.threshold ? 1.0f : 0.0f); break;
          }
          ++cover(a, o + k);
        }
    }
    if (cfg_.combine == Combine::mean)
      for (std::size_t i = 0; i < res.probability.values.size(); ++i)
        res.probability.values.data()[i] /= static_cast<float>(cover.data()[i]);
    res.occupancy = binarize(res.probability, cfg_.threshold);
    return res;
  }

 private:
  Predictor& near_;
  Predictor& far_;
  InferenceConfig cfg_;
};

inline InferenceResult sliding_window_infer(const PolarGrid& radar, const ModelCheckpoint& near,
                                            const ModelCheckpoint& far, const InferenceConfig& cfg) {
  Predictor pn(near), pf(far);
  return SlidingWindowInference(pn, pf, cfg).run(radar);
}

/// Whole-image inference with a single model (the no-sliding-window baseline).
inline InferenceResult full_image_infer(const PolarGrid& radar, Predictor& model, float threshold) {
  InferenceResult res;
  res.offsets = {0};
  res.probability = model.predict(radar);
  res.occupancy = binarize(res.probability, threshold);
  return res;
}

struct TimingReport {
  std::size_t frames = 0;
  std::size_t windows = 0;
  double seconds = 0.0;
  double frames_per_second() const { return seconds > 0.0 ? static_cast<double>(frames) / seconds : 0.0; }
};

struct FramePrediction {
  InferenceResult polar;
  CartesianGrid cartesian_probability;
  CartesianGrid cartesian_occupancy;
};

/// Runs sliding-window inference over `n_frames` frames produced by
/// `load(i)`, calling `sink(i, prediction)` for each one. Cartesian views use
/// the given resolution and half extent (<= 0 means the full radar range).
template <class Loader, class Sink>
TimingReport full_range_predict(std::size_t n_frames, Loader&& load, SlidingWindowInference& infer,
                                double cart_resolution, double cart_half_extent, Sink&& sink) {
  TimingReport t;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n_frames; ++i) {
    FramePrediction fp;
    fp.polar = infer.run(load(i));
    const double half = cart_half_extent > 0.0 ? cart_half_extent : fp.polar.probability.max_range();
    fp.cartesian_probability = polar_to_cartesian(fp.polar.probability, cart_resolution, half);
    fp.cartesian_occupancy = binarize(fp.cartesian_probability, infer.config().threshold);
    t.windows += fp.polar.offsets.size();
    sink(i, fp);
    ++t.frames;
  }
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return t;
}

}  // namespace radocc
