#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "radocc/error.hpp"
#include "toml.hpp"

namespace radocc::config {

/// Built-in defaults. `tiny` is the desk-scale benchmark; `paper` uses the full
/// 400 x 930 sensor geometry and the full-size network.
inline toml::table preset(std::string_view name) {
  if (name != "tiny" && name != "paper") throw ConfigError("unknown preset '" + std::string(name) + "'");
  const bool paper = name == "paper";
  toml::table t;
  t.insert("preset", std::string(name));
  t.insert("paths", toml::table{{"root", "run"},
                                {"dataset", ""},
                                {"prepared", ""},
                                {"models", ""},
                                {"inference", ""},
                                {"eval", ""},
                                {"report", ""}});
  t.insert("synth", toml::table{{"seed", 1},
                                {"n_sequences", 20},
                                {"frames_per_sequence", 25},
                                {"n_azimuth", paper ? 400 : 128},
                                {"n_range", paper ? 930 : 512},
                                {"range_resolution", paper ? 0.175 : 0.25},
                                {"subrays", 16},
                                {"speed", 5.0},
                                {"radar_hz", 4.0},
                                {"lidar_per_radar", 5},
                                {"lidar_beams", paper ? 2048 : 1024},
                                {"lidar_range", paper ? 60.0 : 48.0},
                                {"scene_extent", paper ? 190.0 : 150.0},
                                {"n_hedges", 4},
                                {"n_tree_clusters", 4},
                                {"n_vehicles", 6},
                                {"n_far_vehicles", 2},
                                {"noise", true}});
  t.insert("prepare", toml::table{{"range_resolution", 0.0},  // 0 keeps the dataset resolution
                                  {"p", 0.08},
                                  {"visibility_neighborhood", 1},
                                  {"visibility_filter", true},
                                  {"ground_z_threshold", -1.5},
                                  {"gt_max_range", paper ? 52.5 : 48.0},
                                  {"min_points_per_cell", 1},
                                  {"motion_compensation", true},
                                  {"lidar_per_radar", 5},
                                  {"test_sequences", 4},
                                  {"region_d", paper ? 100 : 32},
                                  {"region_n_max", 3},
                                  {"cart_resolution", paper ? 0.175 : 0.25}});
  t.insert("train", toml::table{{"depth", 4},
                                {"base_channels", paper ? 64 : 16},
                                {"azimuth_padding", "circular"},
                                {"upsample", "transpose"},
                                {"train_range_bins", paper ? 300 : 96},
                                {"lr", 0.001},
                                {"weight_decay", 1e-8},
                                {"momentum", 0.9},
                                {"batch_size", 10},
                                {"epochs", 20},
                                {"val_fraction", 0.10},
                                {"seed", 0},
                                {"epsilon", 1.0},
                                {"loss_reduction", "batch"},
                                {"near_alpha", 0.5},
                                {"near_beta", 0.5},
                                {"far_alpha", 0.4},
                                {"far_beta", 0.6},
                                {"target", "filtered"},
                                {"extrapolation_models", true}});
  t.insert("infer", toml::table{{"window_bins", paper ? 300 : 96},
                                {"stride_bins", paper ? 60 : 16},
                                {"combine", "max"},
                                {"threshold", 0.5},
                                {"routing", "window"},
                                {"cart_resolution", paper ? 0.35 : 0.25},
                                {"split", "test"}});
  t.insert("eval", toml::table{{"region_d", paper ? 100 : 32},
                               {"threshold", 0.5},
                               {"extrapolation", true},
                               {"gt", "filtered"}});
  t.insert("report", toml::table{{"gallery_frames", 4}});
  return t;
}

namespace detail {

inline bool compatible(const toml::node& def, const toml::node& val) {
  if (def.type() == val.type()) return true;
  return def.is_floating_point() && val.is_integer();
}

inline void assign(toml::table& dst, std::string_view key, const toml::node& def, const toml::node& val) {
  if (def.is_floating_point() && val.is_integer())
    dst.insert_or_assign(key, static_cast<double>(val.as_integer()->get()));
  else
    dst.insert_or_assign(key, val);
}

}  // namespace detail

/// Overlays `overlay` onto `base`. Keys absent from `base` and values whose
/// type differs from the default are rejected with ConfigError.
inline void merge_checked(toml::table& base, const toml::table& overlay, std::string_view origin,
                          const std::string& prefix = "") {
  for (auto&& [k, v] : overlay) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    toml::node* def = base.get(k.str());
    if (!def) throw ConfigError(std::string(origin) + ": unknown key '" + key + "'");
    if (def->is_table()) {
      if (!v.is_table()) throw ConfigError(std::string(origin) + ": '" + key + "' must be a table");
      merge_checked(*def->as_table(), *v.as_table(), origin, key);
      continue;
    }
    if (!detail::compatible(*def, v))
      throw ConfigError(std::string(origin) + ": '" + key + "' has the wrong type");
    detail::assign(base, k.str(), *def, v);
  }
}

/// Applies "section.key=value"; the value is parsed according to the type of
/// the existing default.
inline void apply_override(toml::table& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' lacks '='");
  const std::string path(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  toml::table* tbl = &cfg;
  std::string key = path;
  if (const auto dot = path.find('.'); dot != std::string::npos) {
    toml::node* sec = cfg.get(path.substr(0, dot));
    if (!sec || !sec->is_table()) throw ConfigError("unknown config section in '" + path + "'");
    tbl = sec->as_table();
    key = path.substr(dot + 1);
  }
  toml::node* def = tbl->get(key);
  if (!def || def->is_table()) throw ConfigError("unknown config key '" + path + "'");
  try {
    if (def->is_string()) {
      tbl->insert_or_assign(key, value);
    } else if (def->is_boolean()) {
      if (value != "true" && value != "false") throw ConfigError("'" + path + "' expects true or false");
      tbl->insert_or_assign(key, value == "true");
    } else if (def->is_integer()) {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      tbl->insert_or_assign(key, static_cast<std::int64_t>(v));
    } else if (def->is_floating_point()) {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
      tbl->insert_or_assign(key, v);
    } else {
      throw ConfigError("'" + path + "' cannot be overridden from the command line");
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value '" + value + "' for '" + path + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("value '" + value + "' out of range for '" + path + "'");
  }
}

/// Defaults from the preset (the --preset flag, else the file's `preset` key,
/// else tiny), then the file, then overrides in order. A non-empty
/// `root_default` replaces the preset's paths.root before the file is applied.
inline toml::table load(const std::filesystem::path& file, const std::string& preset_flag,
                        const std::vector<std::string>& overrides, const std::string& root_default = "") {
  toml::table file_tbl;
  if (!file.empty()) {
    try {
      file_tbl = toml::parse_file(file.string());
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << file.string() << ": " << e.description() << " at line " << e.source().begin.line;
      throw ConfigError(os.str());
    }
  }
  std::string name = "tiny";
  if (auto p = file_tbl["preset"].value<std::string>()) name = *p;
  if (!preset_flag.empty()) name = preset_flag;
  toml::table cfg = preset(name);
  if (!root_default.empty()) cfg["paths"].as_table()->insert_or_assign("root", root_default);
  file_tbl.erase("preset");
  merge_checked(cfg, file_tbl, file.empty() ? "config" : file.string());
  cfg.insert_or_assign("preset", name);
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

template <class T>
T get(const toml::table& cfg, std::string_view section, std::string_view key) {
  const toml::node* sec = cfg.get(section);
  if (!sec || !sec->is_table()) throw ConfigError("missing config section [" + std::string(section) + "]");
  const toml::node* n = sec->as_table()->get(key);
  if (!n) throw ConfigError("missing config key " + std::string(section) + "." + std::string(key));
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n->value<double>()) return *v;
  } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (auto v = n->value<std::int64_t>()) return static_cast<T>(*v);
  } else {
    if (auto v = n->value<T>()) return *v;
  }
  throw ConfigError("config key " + std::string(section) + "." + std::string(key) + " has the wrong type");
}

inline std::string to_toml(const toml::table& cfg) {
  std::ostringstream os;
  os << cfg << '\n';
  return os.str();
}

/// Echoes the effective configuration into an output directory.
inline void write_effective(const std::filesystem::path& dir, const toml::table& cfg) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "effective_config.toml");
  if (!out) throw std::runtime_error("cannot write " + (dir / "effective_config.toml").string());
  out << to_toml(cfg);
}

}  // namespace radocc::config
