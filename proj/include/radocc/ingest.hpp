#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/png_io.hpp"

namespace radocc {

using Timestamp = std::int64_t;  // microseconds

/// One radar sweep. `power` is raw / 255 at the current range resolution.
struct RadarFrame {
  Timestamp timestamp = 0;
  Raster raw_power;  // 0..255; integral until resampled
  PolarGrid power;

  int n_azimuth() const { return power.n_azimuth(); }
  int n_range() const { return power.n_range(); }
  double range_resolution() const { return power.range_resolution; }
};

inline RadarFrame make_radar_frame(Timestamp ts, const Image<std::uint8_t>& raw, double range_resolution) {
  RadarFrame f;
  f.timestamp = ts;
  f.raw_power = Raster(raw.rows(), raw.cols());
  f.power = PolarGrid(raw.rows(), raw.cols(), range_resolution, GridKind::power);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    f.raw_power.data()[i] = raw.data()[i];
    f.power.values.data()[i] = static_cast<float>(raw.data()[i] / 255.0);
  }
  return f;
}

/// Quantizes a [0,1] power grid to the 8-bit radar convention.
inline RadarFrame radar_frame_from_power(Timestamp ts, const PolarGrid& power) {
  Image<std::uint8_t> raw(power.n_azimuth(), power.n_range());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw.data()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(power.values.data()[i], 0.0f, 1.0f) * 255.0f));
  return make_radar_frame(ts, raw, power.range_resolution);
}

struct LidarPoint {
  float x = 0, y = 0, z = 0, intensity = 0;
  friend bool operator==(const LidarPoint&, const LidarPoint&) = default;
};

struct LidarScan {
  Timestamp timestamp = 0;
  std::vector<LidarPoint> points;
  friend bool operator==(const LidarScan&, const LidarScan&) = default;
};

struct Pose2 {
  double x = 0, y = 0, yaw = 0;
};

/// Wraps to (-pi, pi].
inline double wrap_pi(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a <= 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

inline Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, wrap_pi(a.yaw + b.yaw)};
}

inline Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  return {-(c * p.x + s * p.y), -(-s * p.x + c * p.y), wrap_pi(-p.yaw)};
}

inline std::pair<double, double> transform_point(const Pose2& p, double x, double y) {
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  return {p.x + c * x - s * y, p.y + s * x + c * y};
}

struct PoseSample {
  Timestamp timestamp = 0;
  Pose2 pose;
};

/// Immutable, strictly time-ordered planar trajectory.
class PoseTrajectory {
 public:
  PoseTrajectory() = default;
  explicit PoseTrajectory(std::vector<PoseSample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 1; i < samples_.size(); ++i)
      if (samples_[i].timestamp <= samples_[i - 1].timestamp)
        throw InvalidArgument("PoseTrajectory: timestamps must be strictly increasing");
    for (auto& s : samples_) s.pose.yaw = wrap_pi(s.pose.yaw);
  }

  const std::vector<PoseSample>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }

 private:
  std::vector<PoseSample> samples_;
};

/// Linear in (x, y), shortest arc in yaw.
inline Pose2 interpolate_pose(const PoseTrajectory& traj, Timestamp t) {
  const auto& s = traj.samples();
  if (s.empty() || t < s.front().timestamp || t > s.back().timestamp)
    throw ExtrapolationError("interpolate_pose: t=" + std::to_string(t) + " outside trajectory");
  auto it = std::lower_bound(s.begin(), s.end(), t, [](const PoseSample& a, Timestamp v) { return a.timestamp < v; });
  if (it->timestamp == t) return it->pose;
  const PoseSample& b = *it;
  const PoseSample& a = *(it - 1);
  const double f = static_cast<double>(t - a.timestamp) / static_cast<double>(b.timestamp - a.timestamp);
  const double dyaw = wrap_pi(b.pose.yaw - a.pose.yaw);
  return {a.pose.x + f * (b.pose.x - a.pose.x), a.pose.y + f * (b.pose.y - a.pose.y), wrap_pi(a.pose.yaw + f * dyaw)};
}

/// Indices of the `k` lidar scans nearest to the radar timestamp, in time
/// order. Ties go to the earlier scan. `lidar_timestamps` must be sorted.
inline std::vector<std::size_t> sync_lidar_to_radar(Timestamp radar_ts, const std::vector<Timestamp>& lidar_timestamps,
                                                    std::size_t k = 5) {
  const std::size_t n = lidar_timestamps.size();
  if (n < k)
    throw InsufficientData("sync_lidar_to_radar: need " + std::to_string(k) + " lidar scans, sequence has " +
                           std::to_string(n));
  auto it = std::lower_bound(lidar_timestamps.begin(), lidar_timestamps.end(), radar_ts);
  std::size_t right = static_cast<std::size_t>(it - lidar_timestamps.begin());
  std::size_t left = right;  // window [left, right)
  auto dist = [&](std::size_t i) {
    const Timestamp d = lidar_timestamps[i] - radar_ts;
    return d < 0 ? -d : d;
  };
  while (right - left < k) {
    if (left == 0) {
      ++right;
    } else if (right == n) {
      --left;
    } else if (dist(left - 1) <= dist(right)) {
      --left;
    } else {
      ++right;
    }
  }
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = left + i;
  return out;
}

/// Bins each output cell as the mean of the native bins whose centres fall
/// inside it. Downsampling only.
inline RadarFrame resample_range(const RadarFrame& frame, double target_resolution) {
  const double native = frame.range_resolution();
  if (!(target_resolution > 0.0) || target_resolution < native * (1.0 - 1e-12))
    throw InvalidArgument("resample_range: target " + std::to_string(target_resolution) +
                          " m/bin is finer than native " + std::to_string(native) + " m/bin");
  const int n_in = frame.n_range();
  const int n_out = static_cast<int>(std::floor(n_in * native / target_resolution + 1e-9));
  if (n_out <= 0) throw InvalidArgument("resample_range: target resolution exceeds frame extent");

  // Native bin k belongs to output bin floor((k + 0.5) * native / target).
  std::vector<int> owner(static_cast<std::size_t>(n_in));
  std::vector<int> counts(static_cast<std::size_t>(n_out), 0);
  for (int k = 0; k < n_in; ++k) {
    const int j = static_cast<int>(std::floor((k + 0.5) * native / target_resolution));
    owner[static_cast<std::size_t>(k)] = j < n_out ? j : -1;
    if (j < n_out) ++counts[static_cast<std::size_t>(j)];
  }

  RadarFrame out;
  out.timestamp = frame.timestamp;
  out.raw_power = Raster(frame.n_azimuth(), n_out, 0.0f);
  out.power = PolarGrid(frame.n_azimuth(), n_out, target_resolution, GridKind::power);
  std::vector<double> acc_raw(static_cast<std::size_t>(n_out));
  std::vector<double> acc(static_cast<std::size_t>(n_out));
  for (int a = 0; a < frame.n_azimuth(); ++a) {
    std::fill(acc_raw.begin(), acc_raw.end(), 0.0);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int k = 0; k < n_in; ++k) {
      const int j = owner[static_cast<std::size_t>(k)];
      if (j < 0) continue;
      acc_raw[static_cast<std::size_t>(j)] += frame.raw_power(a, k);
      acc[static_cast<std::size_t>(j)] += frame.power(a, k);
    }
    for (int j = 0; j < n_out; ++j) {
      const int c = counts[static_cast<std::size_t>(j)];
      if (c == 0) {
        // Only reachable through rounding at the far edge; take the nearest centre.
        const int k = std::min(n_in - 1, static_cast<int>(std::floor((j + 0.5) * target_resolution / native)));
        out.raw_power(a, j) = frame.raw_power(a, k);
        out.power(a, j) = frame.power(a, k);
      } else {
        out.raw_power(a, j) = static_cast<float>(acc_raw[static_cast<std::size_t>(j)] / c);
        out.power(a, j) = static_cast<float>(acc[static_cast<std::size_t>(j)] / c);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

/// Columns preceding the power data in each polar PNG row: int64 timestamp,
/// uint16 sweep counter, uint8 valid flag.
inline constexpr int kRadarMetadataColumns = 11;

inline Timestamp timestamp_from_filename(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  Timestamp ts = 0;
  auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), ts);
  if (ec != std::errc() || ptr != stem.data() + stem.size())
    throw ParseError(path.string() + ": filename is not a timestamp");
  return ts;
}

/// Writes an 8-bit polar PNG in the Oxford layout (metadata columns then power).
inline void save_radar_frame(const std::filesystem::path& path, const RadarFrame& frame) {
  png::GrayImage img;
  img.width = kRadarMetadataColumns + frame.n_range();
  img.height = frame.n_azimuth();
  img.bit_depth = 8;
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (int a = 0; a < img.height; ++a) {
    std::uint16_t* row = img.pixels.data() + static_cast<std::size_t>(a) * static_cast<std::size_t>(img.width);
    const auto ts = static_cast<std::uint64_t>(frame.timestamp);
    for (int b = 0; b < 8; ++b) row[b] = static_cast<std::uint16_t>((ts >> (8 * b)) & 0xff);
    const auto counter = static_cast<std::uint16_t>(a * 5600 / std::max(1, img.height));
    row[8] = counter & 0xff;
    row[9] = counter >> 8;
    row[10] = 255;
    for (int k = 0; k < frame.n_range(); ++k) {
      const float v = std::clamp(frame.raw_power(a, k), 0.0f, 255.0f);
      row[kRadarMetadataColumns + k] = static_cast<std::uint16_t>(std::lround(v));
    }
  }
  png::write_gray(path, img);
}

/// Loads a polar radar PNG and strips the metadata columns. The timestamp
/// comes from the filename.
inline RadarFrame load_radar_frame(const std::filesystem::path& path, int expected_n_azimuth, double range_resolution,
                                   int expected_n_range = -1) {
  const png::GrayImage img = png::read_gray(path);
  if (img.bit_depth != 8) throw ParseError(path.string() + ": radar PNG must be 8-bit");
  const int n_range = img.width - kRadarMetadataColumns;
  if (img.height != expected_n_azimuth || n_range <= 0 || (expected_n_range > 0 && n_range != expected_n_range)) {
    std::ostringstream os;
    os << path.string() << ": expected " << expected_n_azimuth << " rows x "
       << (expected_n_range > 0 ? std::to_string(expected_n_range + kRadarMetadataColumns) : std::string(">11"))
       << " columns, got " << img.height << " x " << img.width;
    throw ParseError(os.str());
  }
  Image<std::uint8_t> raw(img.height, n_range);
  for (int a = 0; a < img.height; ++a)
    for (int k = 0; k < n_range; ++k) raw(a, k) = static_cast<std::uint8_t>(img.at(a, kRadarMetadataColumns + k));
  return make_radar_frame(timestamp_from_filename(path), raw, range_resolution);
}

/// Little-endian float32 x, y, z, intensity records.
inline void save_lidar_scan(const std::filesystem::path& path, const LidarScan& scan) {
  static_assert(std::endian::native == std::endian::little, "lidar writer assumes a little-endian host");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : scan.points) {
    const float rec[4] = {p.x, p.y, p.z, p.intensity};
    os.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
}

inline LidarScan load_lidar_scan(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw ParseError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes % 16 != 0)
    throw ParseError(path.string() + ": size " + std::to_string(bytes) + " is not a multiple of 16-byte records");
  is.seekg(0);
  LidarScan scan;
  scan.timestamp = timestamp_from_filename(path);
  scan.points.resize(bytes / 16);
  for (auto& p : scan.points) {
    float rec[4];
    is.read(reinterpret_cast<char*>(rec), sizeof(rec));
    p = {rec[0], rec[1], rec[2], rec[3]};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw ParseError(path.string() + ": non-finite point coordinate");
  }
  return scan;
}

/// CSV with header "timestamp,x,y,yaw".
inline void save_poses_csv(const std::filesystem::path& path, const PoseTrajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "timestamp,x,y,yaw\n";
  os.precision(17);
  for (const auto& s : traj.samples()) os << s.timestamp << ',' << s.pose.x << ',' << s.pose.y << ',' << s.pose.yaw << '\n';
}

inline PoseTrajectory load_poses_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path.string());
  std::string line;
  std::vector<PoseSample> samples;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.starts_with("timestamp")) continue;
    std::istringstream ls(line);
    std::string f[4];
    for (auto& s : f)
      if (!std::getline(ls, s, ',')) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    try {
      samples.push_back({std::stoll(f[0]), {std::stod(f[1]), std::stod(f[2]), std::stod(f[3])}});
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return PoseTrajectory(std::move(samples));
}

/// Sorted timestamps of files with the given extension in a directory.
inline std::vector<Timestamp> list_timestamps(const std::filesystem::path& dir, const std::string& ext) {
  std::vector<Timestamp> out;
  if (!std::filesystem::is_directory(dir)) throw ParseError("missing directory " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ext) continue;
    out.push_back(timestamp_from_filename(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace radocc
