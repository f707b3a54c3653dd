#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/grid_geometry.hpp"
#include "radocc/model.hpp"

namespace radocc {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Counts over cells where `mask` is non-zero (all cells when mask is null).
/// Values >= 0.5 count as occupied.
inline ConfusionCounts confusion(const Raster& pred, const Raster& gt, const Mask* mask = nullptr) {
  if (!pred.same_shape(gt)) throw InvalidArgument("confusion: prediction and ground truth differ in shape");
  if (mask && !mask->same_shape(pred)) throw InvalidArgument("confusion: mask shape differs from grids");
  ConfusionCounts c;
  const auto& p = pred.data();
  const auto& g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (mask && !mask->data()[i]) continue;
    const bool pp = p[i] >= 0.5f, gg = g[i] >= 0.5f;
    if (pp && gg)
      ++c.tp;
    else if (pp)
      ++c.fp;
    else if (gg)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

inline ConfusionCounts confusion(const PolarGrid& pred, const PolarGrid& gt, const Mask* mask = nullptr) {
  if (!pred.same_geometry(gt)) throw InvalidArgument("confusion: polar grids differ in geometry");
  return confusion(pred.values, gt.values, mask);
}

inline ConfusionCounts confusion(const CartesianGrid& pred, const CartesianGrid& gt, const Mask* mask = nullptr) {
  if (!pred.values.same_shape(gt.values) || pred.resolution != gt.resolution || pred.origin_row != gt.origin_row ||
      pred.origin_col != gt.origin_col)
    throw InvalidArgument("confusion: Cartesian grids differ in geometry");
  return confusion(pred.values, gt.values, mask);
}

/// TP / (TP + FP + FN); empty when nothing is predicted or present.
inline std::optional<double> iou(const ConfusionCounts& c) {
  const std::uint64_t den = c.tp + c.fp + c.fn;
  if (den == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(den);
}

inline std::optional<double> fn_rate(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
}

inline std::optional<double> fp_rate(const ConfusionCounts& c) {
  if (c.fp + c.tn == 0) return std::nullopt;
  return static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

/// IoU of summed counts (the reported aggregate).
inline std::optional<double> micro_iou(const std::vector<ConfusionCounts>& frames) {
  ConfusionCounts s;
  for (const auto& c : frames) s += c;
  return iou(s);
}

/// Mean of per-frame IoUs, skipping undefined frames.
inline std::optional<double> macro_iou(const std::vector<ConfusionCounts>& frames) {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : frames)
    if (auto v = iou(c)) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

struct EvalRecord {
  RegionSpec region;
  ConfusionCounts counts;
  int n_frames = 0;
  std::optional<double> iou() const { return radocc::iou(counts); }
  std::optional<double> fn_rate() const { return radocc::fn_rate(counts); }
  std::optional<double> fp_rate() const { return radocc::fp_rate(counts); }
};

/// Accumulates per-region counts over frames for one representation.
class RegionEvaluator {
 public:
  RegionEvaluator(int d, Space space, RegionShape shape, int rows, int cols, double origin_row, double origin_col,
                  int n_max = -1) {
    RegionPartition p = region_partition(d, space, shape, rows, cols, origin_row, origin_col);
    const int n_avail = static_cast<int>(p.regions.size());
    const int n_keep = n_max < 0 ? n_avail : std::min(n_avail, n_max + 1);
    if (n_max >= n_avail)
      throw OutOfRange("RegionEvaluator: region n=" + std::to_string(n_max) + " exceeds grid bounds");
    for (int n = 0; n < n_keep; ++n) {
      masks_.push_back(std::move(p.regions[n]));
      EvalRecord r;
      r.region = RegionSpec{d, n, space, n == 0 ? RegionRole::train : RegionRole::eval, shape};
      records_.push_back(r);
    }
  }

  static RegionEvaluator polar(int d, const PolarGrid& g, int n_max = -1, RegionShape shape = RegionShape::native) {
    if (shape != RegionShape::native) throw InvalidArgument("RegionEvaluator: polar regions are range bands");
    return RegionEvaluator(d, Space::polar, shape, g.n_azimuth(), g.n_range(), 0.0, 0.0, n_max);
  }
  static RegionEvaluator cartesian(int d, const CartesianGrid& g, int n_max = -1,
                                   RegionShape shape = RegionShape::native) {
    return RegionEvaluator(d, Space::cartesian, shape, g.height(), g.width(), g.origin_row, g.origin_col, n_max);
  }

  void add(const Raster& pred, const Raster& gt) {
    for (std::size_t n = 0; n < masks_.size(); ++n) {
      records_[n].counts += confusion(pred, gt, &masks_[n]);
      ++records_[n].n_frames;
    }
  }

  const std::vector<EvalRecord>& records() const { return records_; }
  const Mask& mask(int n) const { return masks_.at(static_cast<std::size_t>(n)); }

 private:
  std::vector<Mask> masks_;
  std::vector<EvalRecord> records_;
};

struct RateRecord {
  int region = 0;
  ConfusionCounts counts;
  std::optional<double> fn_rate, fp_rate;
};

inline std::vector<RateRecord> fn_fp_rates_by_region(const Raster& pred, const Raster& gt,
                                                     const std::vector<Mask>& regions) {
  std::vector<RateRecord> out;
  for (std::size_t n = 0; n < regions.size(); ++n) {
    RateRecord r;
    r.region = static_cast<int>(n);
    r.counts = confusion(pred, gt, &regions[n]);
    r.fn_rate = fn_rate(r.counts);
    r.fp_rate = fp_rate(r.counts);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Polar vs Cartesian extrapolation

struct RatioRow {
  int region = 0;
  std::optional<double> polar_iou, cartesian_iou, ratio;
};

struct ExtrapolationSummary {
  std::vector<RatioRow> rows;  // n = 1 .. n_max
  std::optional<double> mean_ratio;
  bool polar_better_everywhere = false;
  int undefined_bins = 0;  // bins excluded because a ratio is undefined
};

/// Ratio summary over n >= 1. Bins whose ratio is undefined (either IoU
/// undefined, or Cartesian IoU zero) are excluded from the mean and counted.
inline ExtrapolationSummary summarize_extrapolation(const std::vector<EvalRecord>& polar,
                                                    const std::vector<EvalRecord>& cartesian) {
  ExtrapolationSummary s;
  const std::size_t n = std::min(polar.size(), cartesian.size());
  double sum = 0.0;
  int used = 0;
  s.polar_better_everywhere = n > 1;
  for (std::size_t i = 1; i < n; ++i) {
    RatioRow row;
    row.region = static_cast<int>(i);
    row.polar_iou = polar[i].iou();
    row.cartesian_iou = cartesian[i].iou();
    if (row.polar_iou && row.cartesian_iou && *row.cartesian_iou > 0.0) {
      row.ratio = *row.polar_iou / *row.cartesian_iou;
      sum += *row.ratio;
      ++used;
    } else {
      ++s.undefined_bins;
    }
    const double p = row.polar_iou.value_or(0.0), c = row.cartesian_iou.value_or(0.0);
    if (!(p > c)) s.polar_better_everywhere = false;
    s.rows.push_back(row);
  }
  if (used > 0) s.mean_ratio = sum / used;
  return s;
}

struct ExtrapolationFrame {
  PolarGrid radar;            // power, native polar
  PolarGrid gt_polar;         // occupancy
  CartesianGrid radar_cart;   // power
  CartesianGrid gt_cart;      // occupancy
};

struct ExtrapolationResult {
  std::vector<EvalRecord> polar, cartesian;
  ExtrapolationSummary summary;
};

/// Evaluates models trained on region n = 0 at every region n <= n_max of
/// whole-image predictions, each in its native space.
inline ExtrapolationResult run_extrapolation_experiment(const std::vector<ExtrapolationFrame>& frames,
                                                        const ModelCheckpoint& polar_model,
                                                        const ModelCheckpoint& cart_model, int d, int n_max,
                                                        float threshold = 0.5f) {
  if (!polar_model.initialized() || !cart_model.initialized())
    throw StateError("run_extrapolation_experiment: missing trained model");
  if (frames.empty()) throw InsufficientData("run_extrapolation_experiment: no frames");
  Predictor pp(polar_model), pc(cart_model);
  RegionEvaluator ep = RegionEvaluator::polar(d, frames.front().gt_polar, n_max);
  RegionEvaluator ec = RegionEvaluator::cartesian(d, frames.front().gt_cart, n_max);
  for (const auto& f : frames) {
    ep.add(binarize(pp.predict(f.radar), threshold).values, f.gt_polar.values);
    ec.add(binarize(pc.predict(f.radar_cart), threshold).values, f.gt_cart.values);
  }
  ExtrapolationResult r;
  r.polar = ep.records();
  r.cartesian = ec.records();
  r.summary = summarize_extrapolation(r.polar, r.cartesian);
  return r;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {
inline std::string opt_str(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}
inline std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}
}  // namespace detail

/// Per-region records; IoU is the micro average (from summed counts).
inline void write_region_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records,
                             const std::string& label = "") {
  auto out = detail::open_csv(path);
  out << "# iou aggregation: micro (summed counts)\n";
  out << "label,region,space,d,n_frames,tp,fp,fn,tn,iou,fn_rate,fp_rate\n";
  for (const auto& r : records)
    out << label << ',' << r.region.n << ',' << to_string(r.region.space) << ',' << r.region.d << ',' << r.n_frames
        << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn << ','
        << detail::opt_str(r.iou()) << ',' << detail::opt_str(r.fn_rate()) << ',' << detail::opt_str(r.fp_rate())
        << '\n';
}

inline void write_summary_csv(const std::filesystem::path& path, const ExtrapolationSummary& s) {
  auto out = detail::open_csv(path);
  out << "# ratio = polar IoU / Cartesian IoU; undefined bins excluded from the mean\n";
  out << "region,polar_iou,cartesian_iou,ratio\n";
  for (const auto& r : s.rows)
    out << r.region << ',' << detail::opt_str(r.polar_iou) << ',' << detail::opt_str(r.cartesian_iou) << ','
        << detail::opt_str(r.ratio) << '\n';
  out << "mean," << ',' << ',' << detail::opt_str(s.mean_ratio) << '\n';
  out << "undefined_bins,,," << s.undefined_bins << '\n';
}

}  // namespace radocc
