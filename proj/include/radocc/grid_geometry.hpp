#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/grid.hpp"

namespace radocc {

enum class Space { polar, cartesian };
enum class RegionRole { train, eval };
/// native: polar range bands / Cartesian Chebyshev rings. circular: metric
/// Euclidean annuli in either space.
enum class RegionShape { native, circular };

inline std::string_view to_string(Space s) { return s == Space::polar ? "polar" : "cartesian"; }

struct RegionSpec {
  int d = 100;
  int n = 0;
  Space space = Space::polar;
  RegionRole role = RegionRole::eval;
  RegionShape shape = RegionShape::native;
};

namespace detail {

inline float lerp(float a, float b, double t) { return static_cast<float>(a + (b - a) * t); }

inline int positive_mod(int a, int n) {
  const int m = a % n;
  return m < 0 ? m + n : m;
}

inline int side_for(double half_extent, double resolution) {
  return static_cast<int>(std::ceil(2.0 * half_extent / resolution - 1e-9));
}

}  // namespace detail

/// Samples a polar grid at metric (x, y). Returns 0 outside the covered ranges.
inline float sample_polar(const PolarGrid& src, double x, double y) {
  const int n_az = src.n_azimuth();
  const int n_r = src.n_range();
  const double r = std::hypot(x, y);
  const double lo = src.range_offset * src.range_resolution;
  const double hi = (src.range_offset + n_r) * src.range_resolution;
  if (r < lo || r >= hi) return 0.0f;
  const double theta = wrap_angle(std::atan2(y, x));
  const double v = theta / src.azimuth_step();

  if (src.kind == GridKind::occupancy) {
    const int row = detail::positive_mod(static_cast<int>(std::lround(v)), n_az);
    const int bin = std::clamp(static_cast<int>(std::floor(r / src.range_resolution)) - src.range_offset, 0, n_r - 1);
    return src(row, bin);
  }

  const double u = std::clamp(r / src.range_resolution - 0.5 - src.range_offset, 0.0, static_cast<double>(n_r - 1));
  const int k0 = std::min(static_cast<int>(std::floor(u)), n_r - 1);
  const int k1 = std::min(k0 + 1, n_r - 1);
  const double fu = u - k0;
  const int i_floor = static_cast<int>(std::floor(v));
  const double fv = v - i_floor;
  const int i0 = detail::positive_mod(i_floor, n_az);
  const int i1 = detail::positive_mod(i_floor + 1, n_az);
  const float a = detail::lerp(src(i0, k0), src(i0, k1), fu);
  const float b = detail::lerp(src(i1, k0), src(i1, k1), fu);
  return detail::lerp(a, b, fv);
}

/// Samples a Cartesian grid at metric (x, y). Returns 0 outside the raster.
inline float sample_cartesian(const CartesianGrid& src, double x, double y) {
  const auto [pr, pc] = src.metric_to_pixel(x, y);
  const int h = src.height();
  const int w = src.width();
  if (src.kind == GridKind::occupancy) {
    const long r = std::lround(pr);
    const long c = std::lround(pc);
    if (r < 0 || c < 0 || r >= h || c >= w) return 0.0f;
    return src(static_cast<int>(r), static_cast<int>(c));
  }
  if (pr < -0.5 || pc < -0.5 || pr > h - 0.5 || pc > w - 0.5) return 0.0f;
  const double rr = std::clamp(pr, 0.0, static_cast<double>(h - 1));
  const double cc = std::clamp(pc, 0.0, static_cast<double>(w - 1));
  const int r0 = std::min(static_cast<int>(std::floor(rr)), h - 1);
  const int c0 = std::min(static_cast<int>(std::floor(cc)), w - 1);
  const int r1 = std::min(r0 + 1, h - 1);
  const int c1 = std::min(c0 + 1, w - 1);
  const double fr = rr - r0;
  const double fc = cc - c0;
  const float a = detail::lerp(src(r0, c0), src(r0, c1), fc);
  const float b = detail::lerp(src(r1, c0), src(r1, c1), fc);
  return detail::lerp(a, b, fr);
}

/// Renders a polar grid into a square Cartesian grid centred on the sensor.
/// Power/probability are interpolated bilinearly in (range, azimuth) with a
/// circular azimuth axis; occupancy uses the containing bin.
inline CartesianGrid polar_to_cartesian(const PolarGrid& src, double resolution, double half_extent) {
  if (!(resolution > 0.0)) throw InvalidArgument("polar_to_cartesian: resolution must be positive");
  if (!(half_extent > 0.0)) throw InvalidArgument("polar_to_cartesian: half_extent must be positive");
  if (half_extent > src.max_range() + 1e-9)
    throw InvalidArgument("polar_to_cartesian: half_extent " + std::to_string(half_extent) +
                          " m exceeds polar max range " + std::to_string(src.max_range()) + " m");
  const int side = detail::side_for(half_extent, resolution);
  CartesianGrid out = CartesianGrid::centered(side, resolution, src.kind);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto [x, y] = out.pixel_to_metric(r, c);
      out(r, c) = sample_polar(src, x, y);
    }
  }
  return out;
}

/// Resamples a Cartesian grid onto polar cell centres (range (k+0.5)*res,
/// azimuth i*2pi/n_azimuth).
inline PolarGrid cartesian_to_polar(const CartesianGrid& src, int n_azimuth, int n_range, double range_resolution) {
  if (n_azimuth <= 0 || n_range <= 0) throw InvalidArgument("cartesian_to_polar: shape must be positive");
  if (!(range_resolution > 0.0)) throw InvalidArgument("cartesian_to_polar: range_resolution must be positive");
  PolarGrid out(n_azimuth, n_range, range_resolution, src.kind);
  const double step = out.azimuth_step();
  for (int i = 0; i < n_azimuth; ++i) {
    const double ct = std::cos(i * step);
    const double st = std::sin(i * step);
    for (int k = 0; k < n_range; ++k) {
      const double r = (k + 0.5) * range_resolution;
      out(i, k) = sample_cartesian(src, r * ct, r * st);
    }
  }
  return out;
}

/// Cyclic shift along azimuth: output row (i + k) mod n = input row i.
inline PolarGrid rotate_azimuth(const PolarGrid& src, int k) {
  PolarGrid out = src;
  const int n = src.n_azimuth();
  for (int i = 0; i < n; ++i) {
    const int dst = detail::positive_mod(i + k, n);
    std::copy(src.values.row(i).begin(), src.values.row(i).end(), out.values.row(dst).begin());
  }
  return out;
}

/// Window of all azimuths x bins [start_bin, start_bin + n_bins). The returned
/// grid's range_offset records its absolute position.
inline PolarGrid crop_polar_range(const PolarGrid& src, int start_bin, int n_bins) {
  if (start_bin < 0 || n_bins <= 0 || start_bin + n_bins > src.n_range())
    throw InvalidArgument("crop_polar_range: window [" + std::to_string(start_bin) + ", " +
                          std::to_string(start_bin + n_bins) + ") outside [0, " +
                          std::to_string(src.n_range()) + ")");
  PolarGrid out(src.n_azimuth(), n_bins, src.range_resolution, src.kind);
  out.range_offset = src.range_offset + start_bin;
  for (int a = 0; a < src.n_azimuth(); ++a) {
    auto in = src.values.row(a).subspan(static_cast<std::size_t>(start_bin), static_cast<std::size_t>(n_bins));
    std::copy(in.begin(), in.end(), out.values.row(a).begin());
  }
  return out;
}

/// Writes a cropped window back into a full grid at its recorded offset.
inline void embed_polar_range(const PolarGrid& window, PolarGrid& target) {
  const int start = window.range_offset - target.range_offset;
  if (window.n_azimuth() != target.n_azimuth() || start < 0 || start + window.n_range() > target.n_range())
    throw InvalidArgument("embed_polar_range: window does not fit target");
  for (int a = 0; a < window.n_azimuth(); ++a)
    std::copy(window.values.row(a).begin(), window.values.row(a).end(),
              target.values.row(a).begin() + start);
}

/// Square crop of side `side` centred on the sensor.
inline CartesianGrid crop_cartesian_center(const CartesianGrid& src, int side) {
  const int r0 = static_cast<int>(std::lround(src.origin_row - (side - 1) / 2.0));
  const int c0 = static_cast<int>(std::lround(src.origin_col - (side - 1) / 2.0));
  if (side <= 0 || r0 < 0 || c0 < 0 || r0 + side > src.height() || c0 + side > src.width())
    throw InvalidArgument("crop_cartesian_center: crop exceeds grid");
  CartesianGrid out(side, side, src.resolution, src.origin_row - r0, src.origin_col - c0, src.kind);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) out(r, c) = src(r0 + r, c0 + c);
  return out;
}

// ---------------------------------------------------------------------------
// Region segmentation

namespace detail {

/// Distance of a cell from the sensor in region units (bins or pixels).
inline double region_distance(const RegionSpec& spec, int row, int col, double origin_row, double origin_col) {
  if (spec.space == Space::polar) return col + 0.5;
  const double dr = row - origin_row;
  const double dc = col - origin_col;
  if (spec.shape == RegionShape::circular) return std::hypot(dr, dc);
  return std::max(std::abs(dr), std::abs(dc));
}

inline void check_region_fits(const RegionSpec& spec, int rows, int cols, double origin_row, double origin_col) {
  if (spec.d <= 0) throw InvalidArgument("region_mask: d must be positive");
  if (spec.n < 0) throw InvalidArgument("region_mask: n must be non-negative");
  const double outer = static_cast<double>(spec.n + 1) * spec.d;
  double available = 0.0;
  if (spec.space == Space::polar) {
    available = cols;
  } else {
    available = std::min({origin_row + 0.5, origin_col + 0.5, rows - 0.5 - origin_row, cols - 0.5 - origin_col});
  }
  if (outer > available + 1e-9)
    throw OutOfRange("region_mask: region n=" + std::to_string(spec.n) + " (d=" + std::to_string(spec.d) +
                     ") exceeds grid bounds");
}

}  // namespace detail

/// Mask for one training/evaluation region. Polar regions are range bands
/// [n*d, (n+1)*d) across all azimuths; Cartesian regions are rings
/// n*d <= dist < (n+1)*d pixels around the sensor (Chebyshev for native
/// shape, Euclidean for circular).
inline Mask region_mask(const RegionSpec& spec, int rows, int cols, double origin_row, double origin_col) {
  detail::check_region_fits(spec, rows, cols, origin_row, origin_col);
  Mask m(rows, cols, 0);
  const double lo = static_cast<double>(spec.n) * spec.d;
  const double hi = static_cast<double>(spec.n + 1) * spec.d;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double dist = detail::region_distance(spec, r, c, origin_row, origin_col);
      m(r, c) = dist >= lo && dist < hi ? 1 : 0;
    }
  }
  return m;
}

/// Cartesian overload assumes the sensor at the geometric centre.
inline Mask region_mask(const RegionSpec& spec, int rows, int cols) {
  return region_mask(spec, rows, cols, (rows - 1) / 2.0, (cols - 1) / 2.0);
}

inline Mask region_mask(const RegionSpec& spec, const PolarGrid& g) {
  return region_mask(spec, g.n_azimuth(), g.n_range(), 0.0, 0.0);
}

inline Mask region_mask(const RegionSpec& spec, const CartesianGrid& g) {
  return region_mask(spec, g.height(), g.width(), g.origin_row, g.origin_col);
}

struct RegionPartition {
  std::vector<Mask> regions;  // index = n
  Mask remainder;
  std::size_t remainder_cells = 0;
};

/// All regions n = 0, 1, ... that fit, plus the leftover cells.
inline RegionPartition region_partition(int d, Space space, RegionShape shape, int rows, int cols,
                                        double origin_row, double origin_col) {
  RegionPartition out;
  out.remainder = Mask(rows, cols, 1);
  for (int n = 0;; ++n) {
    RegionSpec spec{d, n, space, n == 0 ? RegionRole::train : RegionRole::eval, shape};
    Mask m;
    try {
      m = region_mask(spec, rows, cols, origin_row, origin_col);
    } catch (const OutOfRange&) {
      break;
    }
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.data()[i]) out.remainder.data()[i] = 0;
    out.regions.push_back(std::move(m));
  }
  out.remainder_cells = static_cast<std::size_t>(
      std::count(out.remainder.data().begin(), out.remainder.data().end(), std::uint8_t{1}));
  return out;
}

inline std::size_t mask_count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](auto v) { return v != 0; }));
}

}  // namespace radocc
