#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/png_io.hpp"

namespace radocc {

// Grids are stored as 16-bit grayscale PNG (value * 65535) plus a JSON sidecar
// with the same stem. Occupancy grids round-trip bit-exactly.

inline std::filesystem::path sidecar_path(const std::filesystem::path& png_path) {
  auto p = png_path;
  p.replace_extension(".json");
  return p;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline nlohmann::json sidecar(const PolarGrid& g) {
  return {{"space", "polar"},
          {"kind", std::string(to_string(g.kind))},
          {"n_azimuth", g.n_azimuth()},
          {"n_range", g.n_range()},
          {"range_resolution", g.range_resolution},
          {"range_offset", g.range_offset}};
}

inline nlohmann::json sidecar(const CartesianGrid& g) {
  return {{"space", "cartesian"},
          {"kind", std::string(to_string(g.kind))},
          {"width", g.width()},
          {"height", g.height()},
          {"resolution", g.resolution},
          {"sensor_origin", {g.origin_row, g.origin_col}},
          {"range_offset", 0}};
}

inline void save_grid(const std::filesystem::path& png_path, const PolarGrid& g) {
  png::write_gray(png_path, png::from_raster16(g.values));
  write_json(sidecar_path(png_path), sidecar(g));
}

inline void save_grid(const std::filesystem::path& png_path, const CartesianGrid& g) {
  png::write_gray(png_path, png::from_raster16(g.values));
  write_json(sidecar_path(png_path), sidecar(g));
}

namespace detail {

inline Raster load_checked_raster(const std::filesystem::path& png_path, int rows, int cols) {
  auto img = png::read_gray(png_path);
  if (img.height != rows || img.width != cols)
    throw ParseError(png_path.string() + ": image is " + std::to_string(img.height) + "x" +
                     std::to_string(img.width) + ", sidecar says " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  return png::to_raster(img);
}

}  // namespace detail

inline PolarGrid load_polar_grid(const std::filesystem::path& png_path) {
  const auto j = read_json(sidecar_path(png_path));
  try {
    if (j.at("space").get<std::string>() != "polar") throw ParseError(png_path.string() + ": not a polar grid");
    PolarGrid g(j.at("n_azimuth").get<int>(), j.at("n_range").get<int>(), j.at("range_resolution").get<double>(),
                grid_kind_from_string(j.at("kind").get<std::string>()));
    g.range_offset = j.value("range_offset", 0);
    g.values = detail::load_checked_raster(png_path, g.n_azimuth(), g.n_range());
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(png_path.string() + ": bad sidecar: " + e.what());
  }
}

inline CartesianGrid load_cartesian_grid(const std::filesystem::path& png_path) {
  const auto j = read_json(sidecar_path(png_path));
  try {
    if (j.at("space").get<std::string>() != "cartesian")
      throw ParseError(png_path.string() + ": not a cartesian grid");
    const auto& o = j.at("sensor_origin");
    CartesianGrid g(j.at("height").get<int>(), j.at("width").get<int>(), j.at("resolution").get<double>(),
                    o.at(0).get<double>(), o.at(1).get<double>(), grid_kind_from_string(j.at("kind").get<std::string>()));
    g.values = detail::load_checked_raster(png_path, g.height(), g.width());
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(png_path.string() + ": bad sidecar: " + e.what());
  }
}

}  // namespace radocc
