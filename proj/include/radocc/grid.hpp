#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radocc/error.hpp"

namespace radocc {

/// Row-major 2D array. Rows are azimuth for polar data and image rows for
/// Cartesian data.
template <class T>
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw InvalidArgument("Image: negative shape");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }

  std::span<T> row(int r) { return {data_.data() + index(r, 0), static_cast<std::size_t>(cols_)}; }
  std::span<const T> row(int r) const {
    return {data_.data() + index(r, 0), static_cast<std::size_t>(cols_)};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Image& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  template <class U>
  bool same_shape(const Image<U>& o) const { return rows_ == o.rows() && cols_ == o.cols(); }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Raster = Image<float>;
using Mask = Image<std::uint8_t>;

enum class GridKind { power, probability, occupancy };

inline std::string_view to_string(GridKind k) {
  switch (k) {
    case GridKind::power: return "power";
    case GridKind::probability: return "probability";
    case GridKind::occupancy: return "occupancy";
  }
  return "power";
}

inline GridKind grid_kind_from_string(std::string_view s) {
  if (s == "power") return GridKind::power;
  if (s == "probability") return GridKind::probability;
  if (s == "occupancy") return GridKind::occupancy;
  throw ParseError("unknown grid kind '" + std::string(s) + "'");
}

inline void validate_values(const Raster& v, GridKind kind, std::string_view what) {
  for (float x : v.data()) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + ": non-finite value");
    if (kind == GridKind::occupancy && x != 0.0f && x != 1.0f)
      throw InvalidArgument(std::string(what) + ": occupancy grid holds value other than 0/1");
    if (kind == GridKind::probability && (x < 0.0f || x > 1.0f))
      throw InvalidArgument(std::string(what) + ": probability outside [0, 1]");
  }
}

/// Sensor-centric polar BEV grid. Row i is centred on azimuth i * 2pi / n_azimuth
/// (row 0 = vehicle forward axis, counter-clockwise positive). Column k covers
/// ranges [k, k+1) * range_resolution, shifted by range_offset bins for crops.
struct PolarGrid {
  GridKind kind = GridKind::power;
  double range_resolution = 0.175;
  int range_offset = 0;
  Raster values;

  PolarGrid() = default;
  PolarGrid(int n_azimuth, int n_range, double resolution, GridKind k = GridKind::power)
      : kind(k), range_resolution(resolution) {
    if (n_azimuth <= 0 || n_range <= 0) throw InvalidArgument("PolarGrid: shape must be positive");
    if (!(resolution > 0.0)) throw InvalidArgument("PolarGrid: range_resolution must be positive");
    values = Raster(n_azimuth, n_range, 0.0f);
  }

  int n_azimuth() const { return values.rows(); }
  int n_range() const { return values.cols(); }
  double azimuth_step() const { return 2.0 * std::numbers::pi / n_azimuth(); }
  double azimuth_of(int row) const { return row * azimuth_step(); }
  double max_range() const { return (range_offset + n_range()) * range_resolution; }

  float& operator()(int a, int k) { return values(a, k); }
  float operator()(int a, int k) const { return values(a, k); }

  bool same_geometry(const PolarGrid& o) const {
    return values.same_shape(o.values) && range_resolution == o.range_resolution &&
           range_offset == o.range_offset;
  }

  void validate() const {
    if (n_azimuth() <= 0 || n_range() <= 0) throw InvalidArgument("PolarGrid: empty grid");
    if (!(range_resolution > 0.0)) throw InvalidArgument("PolarGrid: range_resolution must be positive");
    validate_values(values, kind, "PolarGrid");
  }

  friend bool operator==(const PolarGrid&, const PolarGrid&) = default;
};

/// Metric Cartesian BEV grid. Pixel (r, c) centre is at
/// x = (c - origin_col) * resolution, y = (origin_row - r) * resolution.
struct CartesianGrid {
  GridKind kind = GridKind::power;
  double resolution = 0.175;
  double origin_row = 0.0;
  double origin_col = 0.0;
  Raster values;

  CartesianGrid() = default;
  CartesianGrid(int height, int width, double res, double o_row, double o_col,
                GridKind k = GridKind::power)
      : kind(k), resolution(res), origin_row(o_row), origin_col(o_col) {
    if (height <= 0 || width <= 0) throw InvalidArgument("CartesianGrid: shape must be positive");
    if (!(res > 0.0)) throw InvalidArgument("CartesianGrid: resolution must be positive");
    values = Raster(height, width, 0.0f);
    validate_origin();
  }

  /// Square grid with the sensor at the geometric centre.
  static CartesianGrid centered(int side, double res, GridKind k = GridKind::power) {
    const double o = (side - 1) / 2.0;
    return CartesianGrid(side, side, res, o, o, k);
  }

  int height() const { return values.rows(); }
  int width() const { return values.cols(); }

  float& operator()(int r, int c) { return values(r, c); }
  float operator()(int r, int c) const { return values(r, c); }

  std::pair<double, double> pixel_to_metric(double row, double col) const {
    return {(col - origin_col) * resolution, (origin_row - row) * resolution};
  }
  /// Returns continuous (row, col); the inverse of pixel_to_metric.
  std::pair<double, double> metric_to_pixel(double x, double y) const {
    return {origin_row - y / resolution, origin_col + x / resolution};
  }

  void validate_origin() const {
    if (origin_row < 0.0 || origin_col < 0.0 || origin_row > height() - 1 || origin_col > width() - 1)
      throw InvalidArgument("CartesianGrid: sensor origin outside grid");
  }

  void validate() const {
    if (!(resolution > 0.0)) throw InvalidArgument("CartesianGrid: resolution must be positive");
    validate_origin();
    validate_values(values, kind, "CartesianGrid");
  }

  friend bool operator==(const CartesianGrid&, const CartesianGrid&) = default;
};

/// Shape and calibration of a polar grid, without values.
struct PolarSpec {
  int n_azimuth = 400;
  int n_range = 930;
  double range_resolution = 0.175;

  PolarGrid make(GridKind kind) const { return PolarGrid(n_azimuth, n_range, range_resolution, kind); }
};

/// Square sensor-centred Cartesian grid.
struct CartesianSpec {
  int side = 200;
  double resolution = 0.175;

  CartesianGrid make(GridKind kind) const { return CartesianGrid::centered(side, resolution, kind); }
};

inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

/// Binarizes probabilities: 1 where value >= threshold.
inline PolarGrid binarize(const PolarGrid& g, float threshold) {
  PolarGrid out = g;
  out.kind = GridKind::occupancy;
  for (float& v : out.values.data()) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

inline CartesianGrid binarize(const CartesianGrid& g, float threshold) {
  CartesianGrid out = g;
  out.kind = GridKind::occupancy;
  for (float& v : out.values.data()) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

inline std::size_t count_occupied(const Raster& r) {
  return static_cast<std::size_t>(std::count_if(r.data().begin(), r.data().end(),
                                                [](float v) { return v >= 0.5f; }));
}

}  // namespace radocc
