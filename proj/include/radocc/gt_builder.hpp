#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/ingest.hpp"

namespace radocc {

struct GtConfig {
  double ground_z_threshold = -1.5;  // metres relative to the sensor; lower points are ground
  double gt_max_range = 50.0;
  int min_points_per_cell = 1;
  double p = 0.08;  // radar power below which lidar cells are treated as radar-invisible
  int visibility_neighborhood = 1;
  bool motion_compensation = true;

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("GtConfig: p must lie in [0,1]");
    if (!(gt_max_range > 0.0)) throw InvalidArgument("GtConfig: gt_max_range must be positive");
    if (min_points_per_cell < 1) throw InvalidArgument("GtConfig: min_points_per_cell must be >= 1");
    if (visibility_neighborhood < 0) throw InvalidArgument("GtConfig: visibility_neighborhood must be >= 0");
  }
};

struct Point2 {
  double x = 0, y = 0;
};

inline LidarScan remove_ground(const LidarScan& scan, const GtConfig& cfg) {
  LidarScan out;
  out.timestamp = scan.timestamp;
  out.points.reserve(scan.points.size());
  for (const auto& p : scan.points)
    if (p.z >= cfg.ground_z_threshold) out.points.push_back(p);
  return out;
}

/// Removes ground, expresses every scan in the sensor frame at `radar_ts` and
/// keeps points within gt_max_range.
inline std::vector<Point2> aggregate_scans(const std::vector<LidarScan>& scans, const PoseTrajectory& traj,
                                           Timestamp radar_ts, const GtConfig& cfg) {
  std::vector<Point2> out;
  const Pose2 radar_pose = cfg.motion_compensation ? interpolate_pose(traj, radar_ts) : Pose2{};
  const Pose2 to_radar = inverse(radar_pose);
  const double max_r2 = cfg.gt_max_range * cfg.gt_max_range;
  for (const auto& raw : scans) {
    const LidarScan scan = remove_ground(raw, cfg);
    const Pose2 rel = cfg.motion_compensation ? compose(to_radar, interpolate_pose(traj, scan.timestamp)) : Pose2{};
    for (const auto& p : scan.points) {
      const auto [x, y] = transform_point(rel, p.x, p.y);
      if (x * x + y * y <= max_r2) out.push_back({x, y});
    }
  }
  return out;
}

/// Polar cell of a metric point: row = nearest azimuth row centre,
/// bin = floor(range / resolution). Returns false outside the grid.
inline bool polar_cell_of(const PolarGrid& g, double x, double y, int& row, int& bin) {
  const double r = std::hypot(x, y);
  const long b = static_cast<long>(std::floor(r / g.range_resolution)) - g.range_offset;
  if (b < 0 || b >= g.n_range()) return false;
  const double v = wrap_angle(std::atan2(y, x)) / g.azimuth_step();
  row = static_cast<int>(std::lround(v)) % g.n_azimuth();
  bin = static_cast<int>(b);
  return true;
}

inline bool cartesian_cell_of(const CartesianGrid& g, double x, double y, int& row, int& col) {
  const auto [pr, pc] = g.metric_to_pixel(x, y);
  const long r = std::lround(pr);
  const long c = std::lround(pc);
  if (r < 0 || c < 0 || r >= g.height() || c >= g.width()) return false;
  row = static_cast<int>(r);
  col = static_cast<int>(c);
  return true;
}

namespace detail {

inline void threshold_counts(const Image<int>& counts, Raster& out, int min_points) {
  for (std::size_t i = 0; i < counts.size(); ++i) out.data()[i] = counts.data()[i] >= min_points ? 1.0f : 0.0f;
}

}  // namespace detail

inline PolarGrid rasterize(const std::vector<Point2>& points, const PolarSpec& spec, int min_points_per_cell = 1) {
  PolarGrid g = spec.make(GridKind::occupancy);
  Image<int> counts(g.n_azimuth(), g.n_range(), 0);
  int row = 0, bin = 0;
  for (const auto& p : points)
    if (polar_cell_of(g, p.x, p.y, row, bin)) ++counts(row, bin);
  detail::threshold_counts(counts, g.values, min_points_per_cell);
  return g;
}

inline CartesianGrid rasterize(const std::vector<Point2>& points, const CartesianSpec& spec,
                               int min_points_per_cell = 1) {
  CartesianGrid g = spec.make(GridKind::occupancy);
  Image<int> counts(g.height(), g.width(), 0);
  int row = 0, col = 0;
  for (const auto& p : points)
    if (cartesian_cell_of(g, p.x, p.y, row, col)) ++counts(row, col);
  detail::threshold_counts(counts, g.values, min_points_per_cell);
  return g;
}

/// Keeps a ground-truth cell only if the strongest radar return within the
/// (2k+1)^2 polar neighbourhood reaches p. Azimuth wraps; range is clipped.
inline PolarGrid radar_visibility_filter(const PolarGrid& gt, const PolarGrid& radar, const GtConfig& cfg) {
  cfg.validate();
  if (!gt.values.same_shape(radar.values) || gt.range_offset != radar.range_offset ||
      std::abs(gt.range_resolution - radar.range_resolution) > 1e-12)
    throw InvalidArgument("radar_visibility_filter: ground truth and radar grids differ in shape or calibration");
  PolarGrid out = gt;
  out.kind = GridKind::occupancy;
  const int n_az = gt.n_azimuth();
  const int n_r = gt.n_range();
  const int k = cfg.visibility_neighborhood;
  const float p = static_cast<float>(cfg.p);
  for (int a = 0; a < n_az; ++a) {
    for (int b = 0; b < n_r; ++b) {
      if (gt(a, b) < 0.5f) {
        out(a, b) = 0.0f;
        continue;
      }
      float best = 0.0f;
      for (int da = -k; da <= k; ++da) {
        const int aa = ((a + da) % n_az + n_az) % n_az;
        for (int db = -k; db <= k; ++db) {
          const int bb = b + db;
          if (bb < 0 || bb >= n_r) continue;
          best = std::max(best, radar(aa, bb));
        }
      }
      out(a, b) = best >= p ? 1.0f : 0.0f;
    }
  }
  return out;
}

struct FilterStats {
  std::size_t gt_cells = 0;
  std::size_t kept_cells = 0;
  std::size_t removed() const { return gt_cells - kept_cells; }
};

inline FilterStats filter_stats(const PolarGrid& gt, const PolarGrid& filtered) {
  return {count_occupied(gt.values), count_occupied(filtered.values)};
}

}  // namespace radocc
