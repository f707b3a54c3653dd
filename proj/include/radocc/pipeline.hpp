#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/grid_geometry.hpp"
#include "radocc/grid_io.hpp"
#include "radocc/gt_builder.hpp"
#include "radocc/ingest.hpp"
#include "radocc/model.hpp"
#include "radocc/synth.hpp"

namespace radocc::pipeline {

namespace fs = std::filesystem;

inline std::string sequence_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "seq_%03zu", i);
  return buf;
}

inline std::uint64_t sequence_seed(std::uint64_t seed, std::size_t i) {
  return synth::derive_seed(seed, 0x5e9, static_cast<std::uint64_t>(i));
}

// ---------------------------------------------------------------------------
// Raw dataset layout
//
//   <root>/manifest.json
//   <root>/seq_NNN/{radar/<ts>.png, lidar/<ts>.bin, labels/<ts>.bin,
//                   truth/<ts>.png (+ .json), poses.csv, scene.json, sequence.json}

inline void write_sequence(const fs::path& dir, const synth::Sequence& seq) {
  for (const char* sub : {"radar", "lidar", "labels", "truth"}) fs::create_directories(dir / sub);
  for (std::size_t k = 0; k < seq.radar.size(); ++k) {
    const std::string ts = std::to_string(seq.radar[k].timestamp);
    save_radar_frame(dir / "radar" / (ts + ".png"), seq.radar[k]);
    save_grid(dir / "truth" / (ts + ".png"), seq.truth[k]);
  }
  for (const auto& l : seq.lidar) {
    const std::string ts = std::to_string(l.scan.timestamp);
    save_lidar_scan(dir / "lidar" / (ts + ".bin"), l.scan);
    synth::save_labels(dir / "labels" / (ts + ".bin"), l.labels);
  }
  save_poses_csv(dir / "poses.csv", seq.poses);
  write_json(dir / "scene.json", synth::Scene::to_json(seq.scene));
  const auto& c = seq.config;
  write_json(dir / "sequence.json", {{"seed", seq.seed},
                                     {"n_frames", seq.radar.size()},
                                     {"n_lidar_scans", seq.lidar.size()},
                                     {"n_azimuth", c.radar.n_azimuth},
                                     {"n_range", c.radar.n_range},
                                     {"range_resolution", c.radar.range_resolution},
                                     {"radar_hz", c.radar_hz},
                                     {"lidar_per_radar", c.lidar_per_radar},
                                     {"speed", c.motion.speed},
                                     {"start_x", c.motion.start_x},
                                     {"t0", c.t0}});
}

struct SequenceData {
  std::string name;
  std::vector<RadarFrame> radar;
  std::vector<LidarScan> lidar;  // sorted by timestamp
  std::vector<PolarGrid> truth;  // empty when the dataset has no oracle
  PoseTrajectory poses;
  synth::Scene scene;
  bool has_scene = false;
};

/// Loads one sequence directory, listing every missing piece in the error.
inline SequenceData load_sequence(const fs::path& dir, int n_azimuth, int n_range, double range_resolution) {
  std::vector<std::string> missing;
  for (const char* p : {"radar", "lidar", "poses.csv"})
    if (!fs::exists(dir / p)) missing.push_back((dir / p).string());
  if (!missing.empty()) {
    std::string msg = "missing dataset files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::runtime_error(msg);
  }
  SequenceData s;
  s.name = dir.filename().string();
  const auto radar_ts = list_timestamps(dir / "radar", ".png");
  const bool with_truth = fs::exists(dir / "truth");
  for (Timestamp ts : radar_ts) {
    const std::string base = std::to_string(ts);
    if (with_truth && !fs::exists(dir / "truth" / (base + ".png"))) missing.push_back((dir / "truth" / (base + ".png")).string());
  }
  if (!missing.empty()) {
    std::string msg = "missing dataset files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::runtime_error(msg);
  }
  for (Timestamp ts : radar_ts) {
    const std::string base = std::to_string(ts);
    s.radar.push_back(load_radar_frame(dir / "radar" / (base + ".png"), n_azimuth, range_resolution, n_range));
    if (with_truth) s.truth.push_back(load_polar_grid(dir / "truth" / (base + ".png")));
  }
  for (Timestamp ts : list_timestamps(dir / "lidar", ".bin"))
    s.lidar.push_back(load_lidar_scan(dir / "lidar" / (std::to_string(ts) + ".bin")));
  s.poses = load_poses_csv(dir / "poses.csv");
  if (fs::exists(dir / "scene.json")) {
    s.scene = synth::scene_from_json(read_json(dir / "scene.json"));
    s.has_scene = true;
  }
  return s;
}

inline SequenceData from_simulation(const synth::Sequence& seq, const std::string& name) {
  SequenceData s;
  s.name = name;
  s.radar = seq.radar;
  for (const auto& l : seq.lidar) s.lidar.push_back(l.scan);
  std::sort(s.lidar.begin(), s.lidar.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  s.truth = seq.truth;
  s.poses = seq.poses;
  s.scene = seq.scene;
  s.has_scene = true;
  return s;
}

// ---------------------------------------------------------------------------
// Ground-truth preparation

struct PrepareSettings {
  GtConfig gt;
  bool visibility_filter = true;
  int lidar_per_radar = 5;
  int region_d = 32;
  int region_n_max = 3;
  double cart_resolution = 0.25;
};

struct PreparedFrame {
  std::string sequence;
  Timestamp timestamp = 0;
  PolarGrid radar;        // power
  PolarGrid gt;           // lidar occupancy before the visibility filter
  PolarGrid gt_filtered;  // after the filter (== gt when disabled)
  PolarGrid truth;        // oracle occupancy, when available
  CartesianGrid cart_radar;
  CartesianGrid cart_gt;  // filtered lidar occupancy in Cartesian space
  FilterStats stats;
};

/// Cartesian side covering regions 0..n_max with ring width d pixels.
inline int cartesian_side(const PrepareSettings& s) { return 2 * s.region_d * (s.region_n_max + 1); }

/// Lidar points whose polar cell survives in `filtered`.
inline std::vector<Point2> visible_points(const std::vector<Point2>& pts, const PolarGrid& filtered) {
  std::vector<Point2> out;
  int row = 0, bin = 0;
  for (const auto& p : pts)
    if (polar_cell_of(filtered, p.x, p.y, row, bin) && filtered(row, bin) >= 0.5f) out.push_back(p);
  return out;
}

inline PreparedFrame prepare_frame(const SequenceData& seq, std::size_t k, const PrepareSettings& s) {
  const RadarFrame& rf = seq.radar.at(k);
  std::vector<Timestamp> lts;
  lts.reserve(seq.lidar.size());
  for (const auto& l : seq.lidar) lts.push_back(l.timestamp);
  const auto idx = sync_lidar_to_radar(rf.timestamp, lts, s.lidar_per_radar);
  std::vector<LidarScan> scans;
  for (std::size_t i : idx) scans.push_back(seq.lidar[i]);
  const auto pts = aggregate_scans(scans, seq.poses, rf.timestamp, s.gt);

  PreparedFrame f;
  f.sequence = seq.name;
  f.timestamp = rf.timestamp;
  f.radar = rf.power;
  const PolarSpec ps{rf.power.n_azimuth(), rf.power.n_range(), rf.power.range_resolution};
  f.gt = rasterize(pts, ps, s.gt.min_points_per_cell);
  f.gt_filtered = s.visibility_filter ? radar_visibility_filter(f.gt, f.radar, s.gt) : f.gt;
  f.stats = filter_stats(f.gt, f.gt_filtered);
  if (k < seq.truth.size()) f.truth = seq.truth[k];

  const int side = cartesian_side(s);
  const double half = side * s.cart_resolution / 2.0;
  if (half <= f.radar.max_range()) {
    f.cart_radar = polar_to_cartesian(f.radar, s.cart_resolution, half);
    f.cart_gt = rasterize(visible_points(pts, f.gt_filtered), CartesianSpec{side, s.cart_resolution},
                          s.gt.min_points_per_cell);
  }
  return f;
}

inline std::vector<PreparedFrame> prepare_sequence(const SequenceData& seq, const PrepareSettings& s) {
  std::vector<PreparedFrame> out;
  for (std::size_t k = 0; k < seq.radar.size(); ++k) out.push_back(prepare_frame(seq, k, s));
  return out;
}

// ---------------------------------------------------------------------------
// Prepared dataset layout
//
//   <root>/manifest.json, stats.csv
//   <root>/<seq>/{radar,gt,gt_filtered,truth,cart_radar,cart_gt}/<ts>.png (+ .json)

inline const std::vector<std::string>& prepared_layers() {
  static const std::vector<std::string> l = {"radar", "gt", "gt_filtered", "truth", "cart_radar", "cart_gt"};
  return l;
}

struct FrameRef {
  std::string sequence;
  Timestamp timestamp = 0;
  std::string split;  // "train" or "test"
  std::string id() const { return sequence + "/" + std::to_string(timestamp); }
};

inline fs::path layer_path(const fs::path& root, const FrameRef& r, const std::string& layer) {
  return root / r.sequence / layer / (std::to_string(r.timestamp) + ".png");
}

inline void write_prepared_frame(const fs::path& root, const PreparedFrame& f) {
  const FrameRef r{f.sequence, f.timestamp, ""};
  for (const auto& l : prepared_layers()) fs::create_directories(root / f.sequence / l);
  save_grid(layer_path(root, r, "radar"), f.radar);
  save_grid(layer_path(root, r, "gt"), f.gt);
  save_grid(layer_path(root, r, "gt_filtered"), f.gt_filtered);
  if (!f.truth.values.empty()) save_grid(layer_path(root, r, "truth"), f.truth);
  if (!f.cart_radar.values.empty()) {
    save_grid(layer_path(root, r, "cart_radar"), f.cart_radar);
    save_grid(layer_path(root, r, "cart_gt"), f.cart_gt);
  }
}

struct PreparedManifest {
  std::vector<FrameRef> frames;
  nlohmann::json meta;

  std::vector<FrameRef> split(const std::string& name) const {
    if (name == "all") return frames;
    std::vector<FrameRef> out;
    for (const auto& f : frames)
      if (f.split == name) out.push_back(f);
    return out;
  }
};

inline void write_prepared_manifest(const fs::path& root, const PreparedManifest& m) {
  nlohmann::json j = m.meta;
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : m.frames)
    frames.push_back({{"sequence", f.sequence}, {"timestamp", f.timestamp}, {"split", f.split}});
  j["frames"] = frames;
  write_json(root / "manifest.json", j);
}

inline PreparedManifest load_prepared_manifest(const fs::path& root) {
  if (!fs::exists(root / "manifest.json"))
    throw std::runtime_error("missing prepared manifest: " + (root / "manifest.json").string());
  PreparedManifest m;
  m.meta = read_json(root / "manifest.json");
  for (const auto& f : m.meta.at("frames"))
    m.frames.push_back({f.at("sequence").get<std::string>(), f.at("timestamp").get<Timestamp>(),
                        f.at("split").get<std::string>()});
  m.meta.erase("frames");
  return m;
}

/// Loads the layers needed for training or evaluation.
inline PreparedFrame load_prepared_frame(const fs::path& root, const FrameRef& r, bool with_cartesian) {
  PreparedFrame f;
  f.sequence = r.sequence;
  f.timestamp = r.timestamp;
  f.radar = load_polar_grid(layer_path(root, r, "radar"));
  f.gt = load_polar_grid(layer_path(root, r, "gt"));
  f.gt_filtered = load_polar_grid(layer_path(root, r, "gt_filtered"));
  if (fs::exists(layer_path(root, r, "truth"))) f.truth = load_polar_grid(layer_path(root, r, "truth"));
  if (with_cartesian && fs::exists(layer_path(root, r, "cart_radar"))) {
    f.cart_radar = load_cartesian_grid(layer_path(root, r, "cart_radar"));
    f.cart_gt = load_cartesian_grid(layer_path(root, r, "cart_gt"));
  }
  f.stats = filter_stats(f.gt, f.gt_filtered);
  return f;
}

// ---------------------------------------------------------------------------
// Training pairs

enum class TargetKind { filtered, raw };

inline TargetKind target_kind_from_string(std::string_view s) {
  if (s == "filtered") return TargetKind::filtered;
  if (s == "raw") return TargetKind::raw;
  throw InvalidArgument("unknown training target '" + std::string(s) + "'");
}

/// Polar windows [0, bins) of radar and ground truth.
inline TrainingPair polar_pair(const PreparedFrame& f, int bins, TargetKind target) {
  const PolarGrid& t = target == TargetKind::filtered ? f.gt_filtered : f.gt;
  TrainingPair p;
  p.input = crop_polar_range(f.radar, 0, bins).values;
  p.target = crop_polar_range(t, 0, bins).values;
  p.range_extent = bins;
  return p;
}

/// Sensor-centred Cartesian crop of side 2 * half_pixels.
inline TrainingPair cartesian_pair(const PreparedFrame& f, int half_pixels) {
  if (f.cart_radar.values.empty()) throw InvalidArgument("cartesian_pair: frame has no Cartesian layers");
  TrainingPair p;
  p.input = crop_cartesian_center(f.cart_radar, 2 * half_pixels).values;
  p.target = crop_cartesian_center(f.cart_gt, 2 * half_pixels).values;
  p.range_extent = half_pixels;
  return p;
}

}  // namespace radocc::pipeline
