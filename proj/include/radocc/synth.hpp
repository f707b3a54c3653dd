#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/grid_io.hpp"
#include "radocc/ingest.hpp"

namespace radocc::synth {

// ---------------------------------------------------------------------------
// Scene description

struct Segment {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double length() const { return std::hypot(x1 - x0, y1 - y0); }
};

/// Hedge or fence: blocks lidar, passes a fraction tau of radar power.
struct Permeable {
  Segment seg;
  double tau = 0.6;
};

/// Slim branch cluster element; visible to lidar only.
struct Twig {
  double x = 0, y = 0, radius = 0.1;
};

/// Oriented rectangle moving at constant planar velocity. (x, y) is the
/// centre at sequence time 0.
struct Vehicle {
  double x = 0, y = 0, heading = 0, length = 4.5, width = 1.8, vx = 0, vy = 0;
  bool parked = false;

  std::array<Segment, 4> edges(double t) const {
    const double cx = x + vx * t, cy = y + vy * t;
    const double c = std::cos(heading), s = std::sin(heading);
    const double hl = length / 2, hw = width / 2;
    std::array<std::pair<double, double>, 4> p{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<std::pair<double, double>, 4> w;
    for (int i = 0; i < 4; ++i) w[i] = {cx + c * p[i].first - s * p[i].second, cy + s * p[i].first + c * p[i].second};
    std::array<Segment, 4> e;
    for (int i = 0; i < 4; ++i) e[i] = {w[i].first, w[i].second, w[(i + 1) % 4].first, w[(i + 1) % 4].second};
    return e;
  }
};

/// A permeable with an object placed behind it (as seen from the road).
struct OccludedPair {
  int permeable = -1;
  enum class Kind { vehicle, wall } kind = Kind::vehicle;
  int index = -1;  // into vehicles or walls
};

struct Scene {
  double extent = 150.0;  // geometry lies in [-extent, extent]^2
  std::vector<Segment> walls;
  std::vector<Permeable> permeables;
  std::vector<Twig> twigs;
  std::vector<Vehicle> vehicles;
  std::vector<OccludedPair> occluded;

  friend bool operator==(const Scene& a, const Scene& b) { return to_json(a) == to_json(b); }
  static nlohmann::json to_json(const Scene& s);
};

enum class ObjectClass : std::uint8_t { none = 0, ground = 1, wall = 2, permeable = 3, twig = 4, vehicle = 5 };

struct ObjectRef {
  ObjectClass cls = ObjectClass::none;
  int index = -1;
  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};

struct SceneParams {
  double extent = 150.0;
  double road_half_width = 6.0;
  double lot_min = 10.0, lot_max = 28.0;
  double lot_gap = 4.0;
  int n_hedges = 4;         // permeables with an object behind them, per scene
  int n_tree_clusters = 4;  // trunk plus twig canopy
  double trunk_half_width = 0.25;
  double canopy_inner = 1.4, canopy_outer = 2.6;
  int twigs_min = 20, twigs_max = 36;
  int n_vehicles = 6;       // moving vehicles on the road
  int n_far_vehicles = 2;   // vehicles placed beyond lidar range
  double lidar_range = 48.0;
  double radar_range = 128.0;
  double max_speed = 12.0;
  double hedge_tau_min = 0.5, hedge_tau_max = 0.7;
  double hedge_gap_min = 4.5, hedge_gap_max = 8.0;  // hedge to occluded object
  double building_prob = 0.6;
  int second_row_buildings = 16;
  int max_retries = 20;
  double sensor_x0 = 0.0;  // sensor start; vehicles and far-vehicle placement refer to it

  void validate() const {
    if (!(extent > 0) || !(road_half_width > 0) || lot_min <= 0 || lot_max < lot_min || lot_gap < 0)
      throw InvalidArgument("SceneParams: non-positive geometry parameter");
    if (n_hedges < 0 || n_tree_clusters < 0 || n_vehicles < 0 || n_far_vehicles < 0)
      throw InvalidArgument("SceneParams: negative object count");
    if (!(hedge_tau_min > 0 && hedge_tau_max < 1 && hedge_tau_min <= hedge_tau_max))
      throw InvalidArgument("SceneParams: tau range must lie in (0,1)");
    if (max_speed < 0) throw InvalidArgument("SceneParams: max_speed must be non-negative");
    if (!(trunk_half_width > 0) || !(canopy_inner > trunk_half_width) || canopy_outer < canopy_inner ||
        twigs_min < 1 || twigs_max < twigs_min)
      throw InvalidArgument("SceneParams: bad tree shape");
  }
};

struct NoiseConfig {
  double speckle_scale = 0.5;  // multiplicative factor (1 - s) + s * Exp(1)
  double multipath_prob = 0.3;
  double strong_return = 0.5;  // clean signal level that can spawn a ghost
  double ghost_gain = 0.5;
  double ring_amplitude = 0.15;
  double ring_range = 5.0;
  double saturation_range = 1.5;
  double saturation_level = 0.6;
  double background_level = 0.02;

  static NoiseConfig off(double background = 0.02) {
    NoiseConfig n;
    n.speckle_scale = 0;
    n.multipath_prob = 0;
    n.ring_amplitude = 0;
    n.saturation_level = 0;
    n.background_level = background;
    return n;
  }

  void validate() const {
    for (double v : {speckle_scale, multipath_prob, strong_return, ghost_gain, ring_amplitude, ring_range,
                     saturation_range, saturation_level, background_level})
      if (!(v >= 0.0)) throw InvalidArgument("NoiseConfig: parameters must be non-negative");
    if (multipath_prob > 1.0 || speckle_scale > 1.0) throw InvalidArgument("NoiseConfig: probability above 1");
  }
};

struct RadarConfig {
  int n_azimuth = 128;
  int n_range = 512;
  double range_resolution = 0.25;
  int subrays = 16;
  double wall_power = 0.7;
  double vehicle_power = 0.9;
  double permeable_power = 0.3;

  PolarSpec spec() const { return {n_azimuth, n_range, range_resolution}; }
};

struct LidarConfig {
  int n_beams = 1024;
  double max_range = 48.0;
  double range_sigma = 0.02;
  std::vector<double> channel_z = {-0.8, 0.3};
  double ground_z = -1.8;
  std::vector<double> ground_rings = {4.0, 5.5, 7.5, 10.0, 13.5};
};

// ---------------------------------------------------------------------------
// Geometry helpers

/// Distance along a unit ray to a segment, if hit. Collinear overlaps report
/// the nearest overlapping point.
inline std::optional<double> ray_segment(double ox, double oy, double dx, double dy, const Segment& s) {
  const double ex = s.x1 - s.x0, ey = s.y1 - s.y0;
  const double denom = dx * ey - dy * ex;
  const double wx = s.x0 - ox, wy = s.y0 - oy;
  if (std::abs(denom) < 1e-12) {
    if (std::abs(wx * dy - wy * dx) > 1e-9) return std::nullopt;
    const double t0 = wx * dx + wy * dy;
    const double t1 = (s.x1 - ox) * dx + (s.y1 - oy) * dy;
    const double lo = std::min(t0, t1), hi = std::max(t0, t1);
    if (hi < 0) return std::nullopt;
    return std::max(lo, 0.0);
  }
  const double t = (wx * ey - wy * ex) / denom;
  const double u = (wx * dy - wy * dx) / denom;
  if (t < 0 || u < 0 || u > 1) return std::nullopt;
  return t;
}

inline std::optional<double> ray_circle(double ox, double oy, double dx, double dy, double cx, double cy, double r) {
  const double fx = ox - cx, fy = oy - cy;
  const double b = fx * dx + fy * dy;
  const double c = fx * fx + fy * fy - r * r;
  const double disc = b * b - c;
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  if (t0 >= 0) return t0;
  const double t1 = -b + sq;
  if (t1 >= 0) return 0.0;  // origin inside the disc
  return std::nullopt;
}

inline double point_segment_distance(double px, double py, const Segment& s) {
  const double ex = s.x1 - s.x0, ey = s.y1 - s.y0;
  const double l2 = ex * ex + ey * ey;
  double t = l2 > 0 ? ((px - s.x0) * ex + (py - s.y0) * ey) / l2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (s.x0 + t * ex), py - (s.y0 + t * ey));
}

struct Hit {
  double dist = 0;
  ObjectRef obj;
};

/// Every intersection of a ray with the scene at time t, nearest first.
inline std::vector<Hit> cast_ray(const Scene& scene, double t, double ox, double oy, double angle, bool include_twigs,
                                 double max_range) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < scene.walls.size(); ++i)
    if (auto d = ray_segment(ox, oy, dx, dy, scene.walls[i]); d && *d <= max_range)
      hits.push_back({*d, {ObjectClass::wall, static_cast<int>(i)}});
  for (std::size_t i = 0; i < scene.permeables.size(); ++i)
    if (auto d = ray_segment(ox, oy, dx, dy, scene.permeables[i].seg); d && *d <= max_range)
      hits.push_back({*d, {ObjectClass::permeable, static_cast<int>(i)}});
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    // A ray crossing a rectangle records its entry face only; the body is opaque.
    std::optional<double> best;
    for (const auto& e : scene.vehicles[i].edges(t))
      if (auto d = ray_segment(ox, oy, dx, dy, e); d && (!best || *d < *best)) best = d;
    if (best && *best <= max_range) hits.push_back({*best, {ObjectClass::vehicle, static_cast<int>(i)}});
  }
  if (include_twigs)
    for (std::size_t i = 0; i < scene.twigs.size(); ++i) {
      const auto& tw = scene.twigs[i];
      if (auto d = ray_circle(ox, oy, dx, dy, tw.x, tw.y, tw.radius); d && *d <= max_range)
        hits.push_back({*d, {ObjectClass::twig, static_cast<int>(i)}});
    }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.obj.cls != b.obj.cls) return a.obj.cls < b.obj.cls;
    return a.obj.index < b.obj.index;
  });
  return hits;
}

// ---------------------------------------------------------------------------
// Deterministic seeding

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (seed, purpose, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

// Distribution objects are implementation-defined across standard libraries;
// these helpers pin the mapping from generator output to values.
inline double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }
inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}
inline double exponential(std::mt19937_64& rng) { return -std::log1p(-uniform01(rng)); }
inline double gaussian(std::mt19937_64& rng) {
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Scene generation

namespace detail {

enum class LotType { empty, building, hedge, trees };

inline void add_rect_walls(Scene& s, double x0, double x1, double y0, double y1) {
  s.walls.push_back({x0, y0, x1, y0});
  s.walls.push_back({x1, y0, x1, y1});
  s.walls.push_back({x1, y1, x0, y1});
  s.walls.push_back({x0, y1, x0, y0});
}

inline bool inside(const Scene& s, double x, double y) { return std::abs(x) <= s.extent && std::abs(y) <= s.extent; }

inline std::optional<Scene> try_generate(std::mt19937_64& rng, const SceneParams& p) {
  Scene s;
  s.extent = p.extent;
  const double half_len = p.extent - 2.0;
  const double rw = p.road_half_width;

  // Lots along both roadsides.
  struct Lot {
    int side;  // +1 left (y > 0), -1 right
    double x0, x1;
    LotType type = LotType::empty;
  };
  std::vector<Lot> lots;
  for (int side : {1, -1}) {
    double x = -half_len + uniform(rng, 0.0, p.lot_gap);
    while (true) {
      const double len = uniform(rng, p.lot_min, p.lot_max);
      if (x + len > half_len) break;
      lots.push_back({side, x, x + len});
      x += len + p.lot_gap;
    }
  }
  if (lots.empty()) return std::nullopt;

  // Required lot types go to lots near the sensor start so they are observed.
  std::vector<std::size_t> order(lots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = std::abs((lots[a].x0 + lots[a].x1) / 2 - p.sensor_x0);
    const double db = std::abs((lots[b].x0 + lots[b].x1) / 2 - p.sensor_x0);
    return std::floor(da / (p.lidar_range * 0.8)) < std::floor(db / (p.lidar_range * 0.8));
  });
  std::size_t next = 0;
  auto take = [&](LotType t, int count) {
    for (int i = 0; i < count; ++i) {
      if (next >= order.size()) return false;
      lots[order[next++]].type = t;
    }
    return true;
  };
  if (!take(LotType::hedge, p.n_hedges) || !take(LotType::trees, p.n_tree_clusters)) return std::nullopt;
  for (; next < order.size(); ++next)
    lots[order[next]].type = uniform01(rng) < p.building_prob ? LotType::building : LotType::empty;

  for (const auto& lot : lots) {
    const double sgn = lot.side;
    const double len = lot.x1 - lot.x0;
    switch (lot.type) {
      case LotType::empty:
        break;
      case LotType::building: {
        const double y0 = rw + uniform(rng, 2.0, 10.0);
        const double y1 = y0 + uniform(rng, 6.0, 20.0);
        if (y1 > p.extent) break;
        add_rect_walls(s, lot.x0, lot.x1, sgn * y0, sgn * y1);
        break;
      }
      case LotType::hedge: {
        const double hy = rw + uniform(rng, 1.0, 3.0);
        const double margin = std::min(1.0, len * 0.1);
        Permeable h{{lot.x0 + margin, sgn * hy, lot.x1 - margin, sgn * hy},
                    uniform(rng, p.hedge_tau_min, p.hedge_tau_max)};
        s.permeables.push_back(h);
        const int hi = static_cast<int>(s.permeables.size()) - 1;
        const double gap = uniform(rng, p.hedge_gap_min, p.hedge_gap_max);
        const double cx = (lot.x0 + lot.x1) / 2;
        if (uniform01(rng) < 0.6) {
          Vehicle v;
          v.x = cx + uniform(rng, -0.25, 0.25) * (len - 6.0);
          v.y = sgn * (hy + gap + v.width / 2);
          v.heading = 0;
          v.parked = true;
          s.vehicles.push_back(v);
          s.occluded.push_back({hi, OccludedPair::Kind::vehicle, static_cast<int>(s.vehicles.size()) - 1});
        } else {
          const double wl = std::max(2.0, (len - 2 * margin) * uniform(rng, 0.4, 0.7));
          const double wy = sgn * (hy + gap);
          s.walls.push_back({cx - wl / 2, wy, cx + wl / 2, wy});
          s.occluded.push_back({hi, OccludedPair::Kind::wall, static_cast<int>(s.walls.size()) - 1});
        }
        break;
      }
      case LotType::trees: {
        const double cy = sgn * (rw + p.canopy_outer + uniform(rng, 0.3, 2.5));
        const double cx = (lot.x0 + lot.x1) / 2;
        // Radar-visible trunk inside a canopy of radar-invisible twigs.
        const double tr = p.trunk_half_width;
        add_rect_walls(s, cx - tr, cx + tr, cy - tr, cy + tr);
        const int n = uniform_int(rng, p.twigs_min, p.twigs_max);
        for (int i = 0; i < n; ++i) {
          const double a = uniform(rng, 0.0, 2 * std::numbers::pi);
          const double r = std::sqrt(uniform(rng, p.canopy_inner * p.canopy_inner, p.canopy_outer * p.canopy_outer));
          s.twigs.push_back({cx + r * std::cos(a), cy + r * std::sin(a), uniform(rng, 0.08, 0.2)});
        }
        // Sometimes a building far behind the trees.
        if (uniform01(rng) < 0.5) {
          const double y0 = std::abs(cy) + 6.0 + uniform(rng, 0.0, 6.0);
          const double y1 = y0 + uniform(rng, 6.0, 15.0);
          if (y1 <= p.extent) add_rect_walls(s, lot.x0, lot.x1, sgn * y0, sgn * y1);
        }
        break;
      }
    }
  }

  // Second row of buildings for long-range structure.
  for (int i = 0; i < p.second_row_buildings; ++i) {
    const double sgn = uniform01(rng) < 0.5 ? 1.0 : -1.0;
    const double w = uniform(rng, 10.0, 35.0), dpt = uniform(rng, 8.0, 25.0);
    const double x0 = uniform(rng, -half_len, half_len - w);
    const double y0 = rw + uniform(rng, 32.0, std::max(33.0, p.extent * 0.8));
    if (y0 + dpt > p.extent - 1.0) continue;
    add_rect_walls(s, x0, x0 + w, sgn * y0, sgn * (y0 + dpt));
  }

  // Moving traffic on two lanes.
  auto add_lane_vehicle = [&](double x) {
    Vehicle v;
    const bool left_lane = uniform01(rng) < 0.5;
    v.y = left_lane ? rw / 2 : -rw / 2;
    const double speed = uniform(rng, 0.0, p.max_speed);
    v.heading = left_lane ? std::numbers::pi : 0.0;
    v.vx = left_lane ? -speed : speed;
    v.x = x;
    s.vehicles.push_back(v);
  };
  for (int i = 0; i < p.n_vehicles; ++i) {
    double x = 0;
    int guard = 0;
    do {
      x = uniform(rng, -half_len + 3, half_len - 3);
    } while (std::abs(x - p.sensor_x0) < 6.0 && ++guard < 100);
    add_lane_vehicle(x);
  }
  for (int i = 0; i < p.n_far_vehicles; ++i) {
    const double lo = p.lidar_range + 5.0, hi = std::min(p.radar_range - 10.0, half_len - 3 - std::abs(p.sensor_x0));
    if (hi <= lo) return std::nullopt;
    const double dist = uniform(rng, lo, hi);
    add_lane_vehicle(p.sensor_x0 + (uniform01(rng) < 0.5 ? dist : -dist));
    s.vehicles.back().vx *= 0.3;  // keep them out of lidar range for a while
  }

  for (const auto& w : s.walls)
    if (!inside(s, w.x0, w.y0) || !inside(s, w.x1, w.y1)) return std::nullopt;
  return s;
}

}  // namespace detail

/// Street scene: a road along x with building, hedge (+ hidden object), tree
/// (twig cluster) and empty lots on both sides, a second building row, and
/// traffic. Deterministic in seed.
inline Scene generate_scene(std::uint64_t seed, const SceneParams& params) {
  params.validate();
  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, 0x5ce7e, static_cast<std::uint64_t>(attempt)));
    if (auto s = detail::try_generate(rng, params)) return std::move(*s);
  }
  throw GenerationError("generate_scene: could not place requested objects after " +
                        std::to_string(params.max_retries) + " attempts (seed " + std::to_string(seed) + ")");
}

/// Placement invariants used by the generator tests.
inline std::vector<std::string> check_scene(const Scene& s, const SceneParams& p) {
  std::vector<std::string> problems;
  auto in = [&](double x, double y) { return std::abs(x) <= s.extent + 1e-9 && std::abs(y) <= s.extent + 1e-9; };
  for (const auto& w : s.walls)
    if (!in(w.x0, w.y0) || !in(w.x1, w.y1)) problems.push_back("wall outside extent");
  for (const auto& h : s.permeables) {
    if (!(h.tau > 0 && h.tau < 1)) problems.push_back("permeable tau outside (0,1)");
    if (!in(h.seg.x0, h.seg.y0) || !in(h.seg.x1, h.seg.y1)) problems.push_back("permeable outside extent");
  }
  for (const auto& t : s.twigs) {
    if (!in(t.x, t.y)) problems.push_back("twig outside extent");
    if (std::abs(t.y) < p.road_half_width) problems.push_back("twig on road");
  }
  for (const auto& v : s.vehicles) {
    if (!in(v.x, v.y)) problems.push_back("vehicle outside extent");
    if (std::hypot(v.vx, v.vy) > p.max_speed + 1e-9) problems.push_back("vehicle too fast");
  }
  if (p.n_tree_clusters > 0 && s.twigs.empty()) problems.push_back("no twigs");
  if (p.n_hedges > 0 && s.occluded.empty()) problems.push_back("no occluded pair");
  if (static_cast<int>(s.occluded.size()) != p.n_hedges) problems.push_back("occluded pair count mismatch");
  if (p.n_far_vehicles > 0) {
    bool far = false;
    for (const auto& v : s.vehicles)
      if (!v.parked && std::abs(v.x - p.sensor_x0) > p.lidar_range) far = true;
    if (!far) problems.push_back("no vehicle beyond lidar range");
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Sensors

struct LabeledScan {
  LidarScan scan;
  std::vector<ObjectRef> labels;  // per point
};

/// One first-hit ray per beam (every object class blocks lidar), plus the
/// unoccluded part of the ground rings.
inline LabeledScan render_lidar(const Scene& scene, double t, const Pose2& pose, const LidarConfig& cfg,
                                std::uint64_t seed, Timestamp ts = 0) {
  if (!detail::inside(scene, pose.x, pose.y)) throw InvalidArgument("render_lidar: pose outside scene extent");
  std::mt19937_64 rng(seed);
  LabeledScan out;
  out.scan.timestamp = ts;
  const double step = 2.0 * std::numbers::pi / cfg.n_beams;
  for (int b = 0; b < cfg.n_beams; ++b) {
    const double local = b * step;
    const double world = pose.yaw + local;
    const auto hits = cast_ray(scene, t, pose.x, pose.y, world, true, cfg.max_range);
    double first = cfg.max_range + 1.0;
    if (!hits.empty()) {
      const Hit& h = hits.front();
      first = h.dist;
      for (double z : cfg.channel_z) {
        const double r = h.dist + cfg.range_sigma * gaussian(rng);
        const float intensity = h.obj.cls == ObjectClass::twig ? 0.2f : h.obj.cls == ObjectClass::permeable ? 0.3f : 0.8f;
        out.scan.points.push_back({static_cast<float>(r * std::cos(local)), static_cast<float>(r * std::sin(local)),
                                   static_cast<float>(z), intensity});
        out.labels.push_back(h.obj);
      }
    }
    for (double ring : cfg.ground_rings) {
      if (ring >= first || ring > cfg.max_range) continue;
      const double r = ring + cfg.range_sigma * gaussian(rng);
      out.scan.points.push_back({static_cast<float>(r * std::cos(local)), static_cast<float>(r * std::sin(local)),
                                 static_cast<float>(cfg.ground_z + 0.02 * gaussian(rng)), 0.1f});
      out.labels.push_back({ObjectClass::ground, -1});
    }
  }
  return out;
}

struct RadarRender {
  RadarFrame frame;  // noisy, 8-bit quantized
  PolarGrid noisy;   // noisy before quantization
  PolarGrid clean;   // geometric returns + background, no noise
};

inline double radar_base_power(const RadarConfig& cfg, ObjectClass c) {
  switch (c) {
    case ObjectClass::wall: return cfg.wall_power;
    case ObjectClass::vehicle: return cfg.vehicle_power;
    case ObjectClass::permeable: return cfg.permeable_power;
    default: return 0.0;
  }
}

/// Beam gain of a sub-ray at fractional offset u in [-0.5, 0.5] of the
/// azimuth bin: 1 on boresight, 0.5 at the bin edges.
inline double beam_gain(double u) { return 1.0 - 2.0 * u * u; }

/// Clean radar returns: every intersection along each sub-ray deposits
/// base * gain * (product of transmissions crossed so far); a cell keeps the
/// strongest deposit over the beam. Walls and vehicles are opaque; twigs have
/// no radar cross-section.
inline PolarGrid render_radar_clean(const Scene& scene, double t, const Pose2& pose, const RadarConfig& cfg,
                                    double background_level) {
  if (!detail::inside(scene, pose.x, pose.y)) throw InvalidArgument("render_radar: pose outside scene extent");
  if (cfg.subrays < 1) throw InvalidArgument("render_radar: subrays must be >= 1");
  PolarGrid clean(cfg.n_azimuth, cfg.n_range, cfg.range_resolution, GridKind::power);
  const double step = clean.azimuth_step();
  const double max_range = cfg.n_range * cfg.range_resolution;
  std::vector<double> acc(static_cast<std::size_t>(cfg.n_range));
  for (int a = 0; a < cfg.n_azimuth; ++a) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int j = 0; j < cfg.subrays; ++j) {
      const double u = (j + 0.5) / cfg.subrays - 0.5;
      const double gain = beam_gain(u);
      const auto hits = cast_ray(scene, t, pose.x, pose.y, pose.yaw + a * step + u * step, false, max_range);
      double transmission = 1.0;
      for (const auto& h : hits) {
        const int bin = static_cast<int>(std::floor(h.dist / cfg.range_resolution));
        if (bin >= cfg.n_range) break;
        auto& cell = acc[static_cast<std::size_t>(bin)];
        cell = std::max(cell, gain * transmission * radar_base_power(cfg, h.obj.cls));
        if (h.obj.cls == ObjectClass::permeable)
          transmission *= scene.permeables[static_cast<std::size_t>(h.obj.index)].tau;
        else
          transmission = 0.0;
        if (transmission <= 0.0) break;
      }
    }
    for (int k = 0; k < cfg.n_range; ++k)
      clean(a, k) = static_cast<float>(std::min(1.0, acc[static_cast<std::size_t>(k)] + background_level));
  }
  return clean;
}

/// Applies speckle, multipath ghosts, ring noise and receiver saturation.
inline PolarGrid apply_radar_noise(const PolarGrid& clean, const NoiseConfig& noise, std::uint64_t seed) {
  noise.validate();
  std::mt19937_64 rng(seed);
  PolarGrid out = clean;
  const int n_r = clean.n_range();
  const int ring_bin = static_cast<int>(std::floor(noise.ring_range / clean.range_resolution));
  const int sat_bins = static_cast<int>(std::ceil(noise.saturation_range / clean.range_resolution));
  for (int a = 0; a < clean.n_azimuth(); ++a) {
    for (int k = 0; k < n_r; ++k) {
      if (noise.speckle_scale > 0) {
        const double f = (1.0 - noise.speckle_scale) + noise.speckle_scale * exponential(rng);
        out(a, k) = static_cast<float>(clean(a, k) * f);
      }
    }
    if (noise.multipath_prob > 0) {
      for (int k = 0; k < n_r; ++k) {
        const double signal = clean(a, k) - noise.background_level;
        if (signal < noise.strong_return) continue;
        if (uniform01(rng) >= noise.multipath_prob) continue;
        const int ghost = 2 * k + 1;
        if (ghost < n_r) out(a, ghost) += static_cast<float>(noise.ghost_gain * signal);
      }
    }
    if (noise.ring_amplitude > 0 && ring_bin >= 0 && ring_bin < n_r)
      out(a, ring_bin) += static_cast<float>(noise.ring_amplitude);
    if (noise.saturation_level > 0)
      for (int k = 0; k < std::min(sat_bins, n_r); ++k)
        out(a, k) = std::max(out(a, k), static_cast<float>(noise.saturation_level));
    for (int k = 0; k < n_r; ++k) out(a, k) = std::clamp(out(a, k), 0.0f, 1.0f);
  }
  return out;
}

inline RadarRender render_radar(const Scene& scene, double t, const Pose2& pose, const RadarConfig& cfg,
                                const NoiseConfig& noise, std::uint64_t seed, Timestamp ts = 0) {
  RadarRender r;
  r.clean = render_radar_clean(scene, t, pose, cfg, noise.background_level);
  r.noisy = apply_radar_noise(r.clean, noise, seed);
  r.frame = radar_frame_from_power(ts, r.noisy);
  return r;
}

// ---------------------------------------------------------------------------
// Oracle occupancy

namespace detail {

/// Visits points along a segment (sensor frame) densely enough to touch
/// every polar or Cartesian cell it crosses.
template <class Visit>
void walk_segment(double x0, double y0, double x1, double y1, double base_step, double az_step, Visit&& visit) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  double s = 0.0;
  while (true) {
    const double f = len > 0 ? std::min(s / len, 1.0) : 0.0;
    const double x = x0 + f * (x1 - x0), y = y0 + f * (y1 - y0);
    visit(x, y);
    if (s >= len) break;
    const double r = std::hypot(x, y);
    s = std::min(len, s + std::max(1e-3, std::min(base_step, 0.25 * r * az_step)));
  }
}

template <class Visit>
void walk_scene(const Scene& scene, double t, const Pose2& pose, double base_step, double az_step, Visit&& visit) {
  const Pose2 to_sensor = inverse(pose);
  auto seg = [&](const Segment& w) {
    const auto [ax, ay] = transform_point(to_sensor, w.x0, w.y0);
    const auto [bx, by] = transform_point(to_sensor, w.x1, w.y1);
    walk_segment(ax, ay, bx, by, base_step, az_step, visit);
  };
  for (const auto& w : scene.walls) seg(w);
  for (const auto& h : scene.permeables) seg(h.seg);
  for (const auto& v : scene.vehicles) {
    // Filled footprint: sweep lines across the rectangle.
    const auto e = v.edges(t);
    const int n = std::max(2, static_cast<int>(std::ceil(v.width / base_step)) + 1);
    for (int i = 0; i < n; ++i) {
      const double f = static_cast<double>(i) / (n - 1);
      // e[0] runs from front-left to rear-left, e[2] from rear-right to front-right.
      const Segment line{e[0].x0 + f * (e[3].x0 - e[0].x0), e[0].y0 + f * (e[3].y0 - e[0].y0),
                         e[0].x1 + f * (e[2].x0 - e[0].x1), e[0].y1 + f * (e[2].y0 - e[0].y1)};
      seg(line);
    }
  }
}

}  // namespace detail

/// Radar-referenced truth: cells touched by walls, permeables or vehicles at
/// time t. Twigs are excluded.
inline PolarGrid true_occupancy(const Scene& scene, double t, const Pose2& pose, const PolarSpec& spec) {
  PolarGrid g = spec.make(GridKind::occupancy);
  const double max_r = spec.n_range * spec.range_resolution;
  detail::walk_scene(scene, t, pose, spec.range_resolution / 4.0, g.azimuth_step(), [&](double x, double y) {
    const double r = std::hypot(x, y);
    if (r >= max_r) return;
    const int bin = static_cast<int>(std::floor(r / spec.range_resolution));
    const int row = static_cast<int>(std::lround(wrap_angle(std::atan2(y, x)) / g.azimuth_step())) % spec.n_azimuth;
    g(row, bin) = 1.0f;
  });
  return g;
}

inline CartesianGrid true_occupancy(const Scene& scene, double t, const Pose2& pose, const CartesianSpec& spec) {
  CartesianGrid g = spec.make(GridKind::occupancy);
  detail::walk_scene(scene, t, pose, spec.resolution / 4.0, 1e9, [&](double x, double y) {
    const auto [pr, pc] = g.metric_to_pixel(x, y);
    const long r = std::lround(pr), c = std::lround(pc);
    if (r < 0 || c < 0 || r >= g.height() || c >= g.width()) return;
    g(static_cast<int>(r), static_cast<int>(c)) = 1.0f;
  });
  return g;
}

/// Cells covered by a single object (for per-object recall).
inline std::vector<std::pair<int, int>> object_cells(const Scene& scene, const ObjectRef& obj, double t,
                                                     const Pose2& pose, const PolarSpec& spec) {
  Scene single;
  single.extent = scene.extent;
  if (obj.cls == ObjectClass::wall) single.walls.push_back(scene.walls.at(static_cast<std::size_t>(obj.index)));
  if (obj.cls == ObjectClass::vehicle) single.vehicles.push_back(scene.vehicles.at(static_cast<std::size_t>(obj.index)));
  if (obj.cls == ObjectClass::permeable)
    single.permeables.push_back(scene.permeables.at(static_cast<std::size_t>(obj.index)));
  const PolarGrid g = true_occupancy(single, t, pose, spec);
  std::vector<std::pair<int, int>> cells;
  for (int a = 0; a < g.n_azimuth(); ++a)
    for (int k = 0; k < g.n_range(); ++k)
      if (g(a, k) > 0.5f) cells.emplace_back(a, k);
  return cells;
}

// ---------------------------------------------------------------------------
// Sequences

struct MotionProfile {
  double speed = 5.0;  // m/s along +x
  double start_x = 0.0;

  Pose2 pose_at(double t) const { return {start_x + speed * t, 0.0, 0.0}; }
};

struct SequenceConfig {
  SceneParams scene;
  RadarConfig radar;
  LidarConfig lidar;
  NoiseConfig noise;
  MotionProfile motion;
  double radar_hz = 4.0;
  int lidar_per_radar = 5;  // 20 Hz lidar
  Timestamp t0 = 1'600'000'000'000'000;
};

struct Sequence {
  Scene scene;
  std::vector<RadarFrame> radar;
  std::vector<PolarGrid> clean;
  std::vector<PolarGrid> truth;
  std::vector<LabeledScan> lidar;
  PoseTrajectory poses;
  SequenceConfig config;
  std::uint64_t seed = 0;

  double seconds(Timestamp ts) const { return static_cast<double>(ts - config.t0) * 1e-6; }
};

inline Timestamp radar_timestamp(const SequenceConfig& cfg, int k) {
  return cfg.t0 + static_cast<Timestamp>(std::llround(k * 1e6 / cfg.radar_hz));
}

inline Timestamp lidar_timestamp(const SequenceConfig& cfg, int j) {
  const double period = 1e6 / (cfg.radar_hz * cfg.lidar_per_radar);
  const int lead = cfg.lidar_per_radar / 2;
  return cfg.t0 + static_cast<Timestamp>(std::llround((j - lead) * period));
}

struct FrameOutput {
  RadarRender radar;
  PolarGrid truth;
};

/// Renders radar frame k. Depends only on (scene, seed, k).
inline FrameOutput render_radar_frame(const Scene& scene, const SequenceConfig& cfg, std::uint64_t seed, int k) {
  const Timestamp ts = radar_timestamp(cfg, k);
  const double t = static_cast<double>(ts - cfg.t0) * 1e-6;
  const Pose2 pose = cfg.motion.pose_at(t);
  FrameOutput f;
  f.radar = render_radar(scene, t, pose, cfg.radar, cfg.noise, derive_seed(seed, 0x7ada7, static_cast<std::uint64_t>(k)), ts);
  f.truth = true_occupancy(scene, t, pose, cfg.radar.spec());
  return f;
}

inline LabeledScan render_lidar_scan(const Scene& scene, const SequenceConfig& cfg, std::uint64_t seed, int j) {
  const Timestamp ts = lidar_timestamp(cfg, j);
  const double t = static_cast<double>(ts - cfg.t0) * 1e-6;
  return render_lidar(scene, t, cfg.motion.pose_at(t), cfg.lidar,
                      derive_seed(seed, 0x1da7, static_cast<std::uint64_t>(j)), ts);
}

inline PoseTrajectory sequence_poses(const SequenceConfig& cfg, int n_frames) {
  std::vector<PoseSample> samples;
  const int n_lidar = n_frames * cfg.lidar_per_radar;
  for (int j = 0; j < n_lidar; ++j) {
    const Timestamp ts = lidar_timestamp(cfg, j);
    samples.push_back({ts, cfg.motion.pose_at(static_cast<double>(ts - cfg.t0) * 1e-6)});
  }
  return PoseTrajectory(std::move(samples));
}

/// Radar at radar_hz, lidar_per_radar lidar scans per radar frame centred on
/// it, ground-truth poses and oracle occupancy.
inline Sequence simulate_sequence(std::uint64_t seed, int n_frames, const SequenceConfig& cfg) {
  if (n_frames <= 0) throw InvalidArgument("simulate_sequence: n_frames must be positive");
  Sequence seq;
  seq.config = cfg;
  seq.seed = seed;
  SceneParams sp = cfg.scene;
  sp.sensor_x0 = cfg.motion.start_x;
  seq.scene = generate_scene(seed, sp);
  for (int k = 0; k < n_frames; ++k) {
    auto f = render_radar_frame(seq.scene, cfg, seed, k);
    seq.radar.push_back(std::move(f.radar.frame));
    seq.clean.push_back(std::move(f.radar.clean));
    seq.truth.push_back(std::move(f.truth));
  }
  const int n_lidar = n_frames * cfg.lidar_per_radar;
  for (int j = 0; j < n_lidar; ++j) seq.lidar.push_back(render_lidar_scan(seq.scene, cfg, seed, j));
  seq.poses = sequence_poses(cfg, n_frames);
  return seq;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json segment_json(const Segment& s) { return {s.x0, s.y0, s.x1, s.y1}; }

inline nlohmann::json Scene::to_json(const Scene& s) {
  nlohmann::json j;
  j["extent"] = s.extent;
  j["walls"] = nlohmann::json::array();
  for (const auto& w : s.walls) j["walls"].push_back(segment_json(w));
  j["permeables"] = nlohmann::json::array();
  for (const auto& p : s.permeables) j["permeables"].push_back({{"segment", segment_json(p.seg)}, {"tau", p.tau}});
  j["twigs"] = nlohmann::json::array();
  for (const auto& t : s.twigs) j["twigs"].push_back({t.x, t.y, t.radius});
  j["vehicles"] = nlohmann::json::array();
  for (const auto& v : s.vehicles)
    j["vehicles"].push_back({{"x", v.x}, {"y", v.y}, {"heading", v.heading}, {"length", v.length},
                             {"width", v.width}, {"vx", v.vx}, {"vy", v.vy}, {"parked", v.parked}});
  j["occluded"] = nlohmann::json::array();
  for (const auto& o : s.occluded)
    j["occluded"].push_back({{"permeable", o.permeable},
                             {"kind", o.kind == OccludedPair::Kind::vehicle ? "vehicle" : "wall"},
                             {"index", o.index}});
  return j;
}

inline Segment segment_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  s.extent = j.at("extent").get<double>();
  for (const auto& w : j.at("walls")) s.walls.push_back(segment_from_json(w));
  for (const auto& p : j.at("permeables")) s.permeables.push_back({segment_from_json(p.at("segment")), p.at("tau").get<double>()});
  for (const auto& t : j.at("twigs")) s.twigs.push_back({t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()});
  for (const auto& v : j.at("vehicles")) {
    Vehicle veh;
    veh.x = v.at("x"); veh.y = v.at("y"); veh.heading = v.at("heading"); veh.length = v.at("length");
    veh.width = v.at("width"); veh.vx = v.at("vx"); veh.vy = v.at("vy"); veh.parked = v.at("parked");
    s.vehicles.push_back(veh);
  }
  for (const auto& o : j.at("occluded"))
    s.occluded.push_back({o.at("permeable").get<int>(),
                          o.at("kind").get<std::string>() == "vehicle" ? OccludedPair::Kind::vehicle : OccludedPair::Kind::wall,
                          o.at("index").get<int>()});
  return s;
}

inline void save_labels(const std::filesystem::path& path, const std::vector<ObjectRef>& labels) {
  std::ofstream os(path, std::ios::binary);
  for (const auto& l : labels) {
    const auto c = static_cast<std::uint8_t>(l.cls);
    os.write(reinterpret_cast<const char*>(&c), 1);
  }
}

}  // namespace radocc::synth
