#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "radocc/config.hpp"
#include "radocc/evaluate.hpp"
#include "radocc/inference.hpp"
#include "radocc/model.hpp"
#include "radocc/parallel.hpp"
#include "radocc/pipeline.hpp"
#include "radocc/report.hpp"
#include "radocc/synth.hpp"

namespace radocc::cli {

namespace fs = std::filesystem;
using config::get;

struct RunOptions {
  int workers = 1;
  bool quiet = false;
};

inline void say(const RunOptions& o, const std::string& msg) {
  if (!o.quiet) std::cerr << "[radocc] " << msg << '\n';
}

struct Paths {
  fs::path root, dataset, prepared, models, inference, eval, report;
};

inline Paths resolve_paths(const toml::table& c) {
  Paths p;
  p.root = get<std::string>(c, "paths", "root");
  auto pick = [&](const char* key) {
    const auto v = get<std::string>(c, "paths", key);
    return v.empty() ? p.root / key : fs::path(v);
  };
  p.dataset = pick("dataset");
  p.prepared = pick("prepared");
  p.models = pick("models");
  p.inference = pick("inference");
  p.eval = pick("eval");
  p.report = pick("report");
  return p;
}

/// Runs `f`, reporting invalid values derived from the config as ConfigError.
template <class F>
auto config_checked(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Config -> library settings

inline synth::SequenceConfig sequence_config(const toml::table& c) {
  return config_checked([&] {
    synth::SequenceConfig s;
    s.radar.n_azimuth = get<int>(c, "synth", "n_azimuth");
    s.radar.n_range = get<int>(c, "synth", "n_range");
    s.radar.range_resolution = get<double>(c, "synth", "range_resolution");
    s.radar.subrays = get<int>(c, "synth", "subrays");
    s.lidar.n_beams = get<int>(c, "synth", "lidar_beams");
    s.lidar.max_range = get<double>(c, "synth", "lidar_range");
    s.scene.extent = get<double>(c, "synth", "scene_extent");
    s.scene.n_hedges = get<int>(c, "synth", "n_hedges");
    s.scene.n_tree_clusters = get<int>(c, "synth", "n_tree_clusters");
    s.scene.n_vehicles = get<int>(c, "synth", "n_vehicles");
    s.scene.n_far_vehicles = get<int>(c, "synth", "n_far_vehicles");
    s.scene.lidar_range = s.lidar.max_range;
    s.scene.radar_range = s.radar.n_range * s.radar.range_resolution;
    s.motion.speed = get<double>(c, "synth", "speed");
    s.radar_hz = get<double>(c, "synth", "radar_hz");
    s.lidar_per_radar = get<int>(c, "synth", "lidar_per_radar");
    if (!get<bool>(c, "synth", "noise")) s.noise = synth::NoiseConfig::off();
    if (s.radar.n_azimuth <= 0 || s.radar.n_range <= 0 || !(s.radar.range_resolution > 0))
      throw InvalidArgument("synth: radar geometry must be positive");
    if (s.radar.subrays < 1 || s.lidar.n_beams < 1) throw InvalidArgument("synth: subrays and lidar_beams must be >= 1");
    if (!(s.radar_hz > 0) || s.lidar_per_radar < 1) throw InvalidArgument("synth: bad sensor rates");
    if (get<int>(c, "synth", "n_sequences") < 1 || get<int>(c, "synth", "frames_per_sequence") < 1)
      throw InvalidArgument("synth: n_sequences and frames_per_sequence must be >= 1");
    s.scene.validate();
    return s;
  });
}

inline pipeline::PrepareSettings prepare_settings(const toml::table& c) {
  return config_checked([&] {
    pipeline::PrepareSettings s;
    s.gt.p = get<double>(c, "prepare", "p");
    s.gt.visibility_neighborhood = get<int>(c, "prepare", "visibility_neighborhood");
    s.gt.ground_z_threshold = get<double>(c, "prepare", "ground_z_threshold");
    s.gt.gt_max_range = get<double>(c, "prepare", "gt_max_range");
    s.gt.min_points_per_cell = get<int>(c, "prepare", "min_points_per_cell");
    s.gt.motion_compensation = get<bool>(c, "prepare", "motion_compensation");
    s.gt.validate();
    s.visibility_filter = get<bool>(c, "prepare", "visibility_filter");
    s.lidar_per_radar = get<int>(c, "prepare", "lidar_per_radar");
    s.region_d = get<int>(c, "prepare", "region_d");
    s.region_n_max = get<int>(c, "prepare", "region_n_max");
    s.cart_resolution = get<double>(c, "prepare", "cart_resolution");
    if (s.lidar_per_radar < 1) throw InvalidArgument("prepare.lidar_per_radar must be >= 1");
    if (s.region_d < 1 || s.region_n_max < 0) throw InvalidArgument("prepare: region_d >= 1 and region_n_max >= 0");
    if (!(s.cart_resolution > 0)) throw InvalidArgument("prepare.cart_resolution must be positive");
    return s;
  });
}

inline NetSpec net_spec(const toml::table& c) {
  return config_checked([&] {
    NetSpec s;
    s.depth = get<int>(c, "train", "depth");
    s.base_channels = get<int>(c, "train", "base_channels");
    s.azimuth_padding = nn::azimuth_padding_from_string(get<std::string>(c, "train", "azimuth_padding"));
    s.upsample = nn::upsample_from_string(get<std::string>(c, "train", "upsample"));
    s.validate();
    return s;
  });
}

inline TrainConfig train_config(const toml::table& c, double alpha, double beta, int range_bins) {
  return config_checked([&] {
    TrainConfig t;
    t.alpha = alpha;
    t.beta = beta;
    t.epsilon = get<double>(c, "train", "epsilon");
    t.lr = get<double>(c, "train", "lr");
    t.weight_decay = get<double>(c, "train", "weight_decay");
    t.momentum = get<double>(c, "train", "momentum");
    t.batch_size = get<int>(c, "train", "batch_size");
    t.epochs = get<int>(c, "train", "epochs");
    t.val_fraction = get<double>(c, "train", "val_fraction");
    t.seed = get<std::uint64_t>(c, "train", "seed");
    t.train_range_bins = range_bins;
    t.loss_reduction = loss_reduction_from_string(get<std::string>(c, "train", "loss_reduction"));
    t.validate();
    return t;
  });
}

inline InferenceConfig inference_config(const toml::table& c) {
  return config_checked([&] {
    InferenceConfig i;
    i.window_bins = get<int>(c, "infer", "window_bins");
    i.stride_bins = get<int>(c, "infer", "stride_bins");
    i.combine = combine_from_string(get<std::string>(c, "infer", "combine"));
    i.threshold = static_cast<float>(get<double>(c, "infer", "threshold"));
    i.validate();
    const auto routing = get<std::string>(c, "infer", "routing");
    if (routing != "window" && routing != "near") throw InvalidArgument("infer.routing must be 'window' or 'near'");
    return i;
  });
}

inline void require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw std::runtime_error("missing " + what + ": " + p.string());
}

// ---------------------------------------------------------------------------
// synth

inline void cmd_synth(const toml::table& cfg, const RunOptions& opt) {
  const Paths P = resolve_paths(cfg);
  const auto seq_cfg = sequence_config(cfg);
  const int n_seq = get<int>(cfg, "synth", "n_sequences");
  const int frames = get<int>(cfg, "synth", "frames_per_sequence");
  const auto seed = get<std::uint64_t>(cfg, "synth", "seed");

  fs::create_directories(P.dataset);
  std::vector<nlohmann::json> entries(static_cast<std::size_t>(n_seq));
  std::mutex m;
  parallel_for(static_cast<std::size_t>(n_seq), opt.workers, [&](std::size_t i) {
    const auto s = pipeline::sequence_seed(seed, i);
    const auto seq = synth::simulate_sequence(s, frames, seq_cfg);
    pipeline::write_sequence(P.dataset / pipeline::sequence_name(i), seq);
    entries[i] = {{"name", pipeline::sequence_name(i)},
                  {"seed", s},
                  {"radar_frames", seq.radar.size()},
                  {"lidar_scans", seq.lidar.size()}};
    std::lock_guard lock(m);
    say(opt, "synth: wrote " + pipeline::sequence_name(i));
  });
  std::size_t n_radar = 0, n_lidar = 0;
  for (const auto& e : entries) {
    n_radar += e["radar_frames"].get<std::size_t>();
    n_lidar += e["lidar_scans"].get<std::size_t>();
  }
  write_json(P.dataset / "manifest.json", {{"format", "radocc-dataset"},
                                           {"seed", seed},
                                           {"n_azimuth", seq_cfg.radar.n_azimuth},
                                           {"n_range", seq_cfg.radar.n_range},
                                           {"range_resolution", seq_cfg.radar.range_resolution},
                                           {"radar_frames", n_radar},
                                           {"lidar_scans", n_lidar},
                                           {"sequences", entries}});
  config::write_effective(P.dataset, cfg);
  say(opt, "synth: " + std::to_string(n_radar) + " radar frames, " + std::to_string(n_lidar) + " lidar scans in " +
               P.dataset.string());
}

// ---------------------------------------------------------------------------
// prepare

struct FrameStats {
  std::string sequence;
  Timestamp timestamp = 0;
  std::string split;
  FilterStats stats;
};

inline void write_stats_csv(const fs::path& path, const std::vector<FrameStats>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sequence,timestamp,split,gt_cells,kept_cells,removed_cells\n";
  std::size_t gt = 0, kept = 0;
  for (const auto& r : rows) {
    out << r.sequence << ',' << r.timestamp << ',' << r.split << ',' << r.stats.gt_cells << ',' << r.stats.kept_cells
        << ',' << r.stats.removed() << '\n';
    gt += r.stats.gt_cells;
    kept += r.stats.kept_cells;
  }
  out << "total,,," << gt << ',' << kept << ',' << gt - kept << '\n';
}

inline void cmd_prepare(const toml::table& cfg, const RunOptions& opt) {
  const Paths P = resolve_paths(cfg);
  const auto settings = prepare_settings(cfg);
  const int test_sequences = get<int>(cfg, "prepare", "test_sequences");
  if (test_sequences < 0) throw ConfigError("prepare.test_sequences must be >= 0");
  require(P.dataset / "manifest.json", "dataset manifest");
  const auto manifest = read_json(P.dataset / "manifest.json");
  const int n_az = manifest.at("n_azimuth").get<int>();
  const int n_range = manifest.at("n_range").get<int>();
  const double res = manifest.at("range_resolution").get<double>();
  const double target_res = get<double>(cfg, "prepare", "range_resolution");
  const bool resample = target_res > 0.0 && std::abs(target_res - res) > 1e-12;
  if (resample && target_res < res)
    throw ConfigError("prepare.range_resolution " + std::to_string(target_res) + " is finer than the dataset's " +
                      std::to_string(res));

  std::vector<std::string> names;
  for (const auto& s : manifest.at("sequences")) names.push_back(s.at("name").get<std::string>());
  {
    std::vector<std::string> missing;
    for (const auto& n : names)
      if (!fs::is_directory(P.dataset / n)) missing.push_back((P.dataset / n).string());
    if (!missing.empty()) {
      std::string msg = "missing dataset files:";
      for (const auto& x : missing) msg += "\n  " + x;
      throw std::runtime_error(msg);
    }
  }
  const std::size_t n_test =
      std::min<std::size_t>(static_cast<std::size_t>(test_sequences), names.size() > 1 ? names.size() - 1 : 0);

  fs::create_directories(P.prepared);
  std::vector<std::vector<FrameStats>> per_seq(names.size());
  std::mutex m;
  parallel_for(names.size(), opt.workers, [&](std::size_t i) {
    auto seq = pipeline::load_sequence(P.dataset / names[i], n_az, n_range, res);
    if (resample) {
      for (auto& f : seq.radar) f = resample_range(f, target_res);
      seq.truth.clear();  // oracle grids stay at the native resolution
    }
    const std::string split = i + n_test >= names.size() ? "test" : "train";
    for (std::size_t k = 0; k < seq.radar.size(); ++k) {
      const auto f = pipeline::prepare_frame(seq, k, settings);
      pipeline::write_prepared_frame(P.prepared, f);
      per_seq[i].push_back({f.sequence, f.timestamp, split, f.stats});
    }
    std::lock_guard lock(m);
    say(opt, "prepare: " + names[i] + " (" + split + ")");
  });

  std::vector<FrameStats> rows;
  for (auto& v : per_seq) rows.insert(rows.end(), v.begin(), v.end());
  write_stats_csv(P.prepared / "stats.csv", rows);

  pipeline::PreparedManifest pm;
  std::size_t gt = 0, kept = 0;
  for (const auto& r : rows) {
    pm.frames.push_back({r.sequence, r.timestamp, r.split});
    gt += r.stats.gt_cells;
    kept += r.stats.kept_cells;
  }
  pm.meta = {{"dataset", fs::absolute(P.dataset).string()},
             {"n_azimuth", n_az},
             {"n_range", resample ? static_cast<int>(std::floor(n_range * res / target_res + 1e-9)) : n_range},
             {"range_resolution", resample ? target_res : res},
             {"native_range_resolution", res},
             {"visibility_filter", settings.visibility_filter},
             {"p", settings.gt.p},
             {"visibility_neighborhood", settings.gt.visibility_neighborhood},
             {"region_d", settings.region_d},
             {"region_n_max", settings.region_n_max},
             {"cart_resolution", settings.cart_resolution},
             {"cart_side", pipeline::cartesian_side(settings)},
             {"totals", {{"gt_cells", gt}, {"kept_cells", kept}, {"removed_cells", gt - kept}}}};
  pipeline::write_prepared_manifest(P.prepared, pm);
  config::write_effective(P.prepared, cfg);
  say(opt, "prepare: " + std::to_string(rows.size()) + " frames, filter removed " + std::to_string(gt - kept) +
               " of " + std::to_string(gt) + " GT cells");
}

// ---------------------------------------------------------------------------
// train

struct TrainJob {
  std::string name;
  NetSpec spec;
  TrainConfig cfg;
  std::vector<TrainingPair> data;
  int n_azimuth = 0;
  double resolution = 0.0;
};

inline std::vector<TrainJob> train_jobs(const toml::table& cfg, const fs::path& prepared) {
  const auto pm = pipeline::load_prepared_manifest(prepared);
  const auto refs = pm.split("train");
  if (refs.empty()) throw InsufficientData("train: the prepared dataset has no training frames");
  const NetSpec spec = net_spec(cfg);
  const int bins = get<int>(cfg, "train", "train_range_bins");
  const int d = pm.meta.at("region_d").get<int>();
  const auto target = config_checked([&] { return pipeline::target_kind_from_string(get<std::string>(cfg, "train", "target")); });
  const bool extrapolation = get<bool>(cfg, "train", "extrapolation_models");
  const int n_az = pm.meta.at("n_azimuth").get<int>();
  const double res = pm.meta.at("range_resolution").get<double>();
  if (bins > pm.meta.at("n_range").get<int>()) throw ConfigError("train.train_range_bins exceeds the frame's range bins");

  std::vector<TrainJob> jobs;
  jobs.push_back({"near", spec,
                  train_config(cfg, get<double>(cfg, "train", "near_alpha"), get<double>(cfg, "train", "near_beta"), bins),
                  {}, n_az, res});
  jobs.push_back({"far", spec,
                  train_config(cfg, get<double>(cfg, "train", "far_alpha"), get<double>(cfg, "train", "far_beta"), bins),
                  {}, n_az, res});
  if (extrapolation) {
    NetSpec cart = spec;
    cart.azimuth_padding = nn::AzimuthPadding::zero;
    jobs.push_back({"polar_n0", spec, train_config(cfg, 0.5, 0.5, d), {}, n_az, res});
    jobs.push_back({"cart_n0", cart, train_config(cfg, 0.5, 0.5, d), {}, 0, pm.meta.at("cart_resolution").get<double>()});
  }
  for (const auto& r : refs) {
    const auto f = pipeline::load_prepared_frame(prepared, r, extrapolation);
    jobs[0].data.push_back(pipeline::polar_pair(f, bins, target));
    jobs[1].data.push_back(jobs[0].data.back());
    if (extrapolation) {
      jobs[2].data.push_back(pipeline::polar_pair(f, d, pipeline::TargetKind::filtered));
      jobs[3].data.push_back(pipeline::cartesian_pair(f, d));
    }
  }
  return jobs;
}

inline void cmd_train(const toml::table& cfg, const RunOptions& opt) {
  const Paths P = resolve_paths(cfg);
  require(P.prepared / "manifest.json", "prepared manifest");
  auto jobs = train_jobs(cfg, P.prepared);
  fs::create_directories(P.models);
  config::write_effective(P.models, cfg);
  std::vector<nlohmann::json> info(jobs.size());
  std::mutex m;
  parallel_for(jobs.size(), opt.workers, [&](std::size_t i) {
    auto& job = jobs[i];
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochLog& e) {
      std::lock_guard lock(m);
      char buf[160];
      std::snprintf(buf, sizeof buf, "train %s: epoch %d train %.4f val %.4f", job.name.c_str(), e.epoch + 1,
                    e.train_loss, e.val_loss);
      say(opt, buf);
    };
    ModelCheckpoint ck = train(job.data, job.spec, job.cfg, hooks);
    ck.n_azimuth = job.n_azimuth;
    ck.range_resolution = job.resolution;
    save_checkpoint(P.models / (job.name + ".ckpt"), ck);
    write_training_log(P.models / (job.name + "_log.csv"), ck.history);
    info[i] = {{"name", job.name},
               {"checkpoint", job.name + ".ckpt"},
               {"alpha", job.cfg.alpha},
               {"beta", job.cfg.beta},
               {"n_train", ck.n_train},
               {"n_val", ck.n_val},
               {"best_epoch", ck.best_epoch},
               {"fingerprint", ck.fingerprint},
               {"input_rows", job.data.front().input.rows()},
               {"input_cols", job.data.front().input.cols()}};
  });
  write_json(P.models / "train_manifest.json", {{"models", info}});
}

// ---------------------------------------------------------------------------
// infer

inline void cmd_infer(const toml::table& cfg, const RunOptions& opt) {
  const Paths P = resolve_paths(cfg);
  const InferenceConfig icfg = inference_config(cfg);
  const auto routing = get<std::string>(cfg, "infer", "routing");
  const auto split = get<std::string>(cfg, "infer", "split");
  const double cart_res = get<double>(cfg, "infer", "cart_resolution");
  if (!(cart_res > 0)) throw ConfigError("infer.cart_resolution must be positive");
  require(P.prepared / "manifest.json", "prepared manifest");
  require(P.models / "near.ckpt", "near model");
  if (routing == "window") require(P.models / "far.ckpt", "far model");

  const auto pm = pipeline::load_prepared_manifest(P.prepared);
  const auto refs = pm.split(split);
  if (refs.empty()) throw InsufficientData("infer: no frames in split '" + split + "'");
  const ModelCheckpoint near = load_checkpoint(P.models / "near.ckpt");
  const ModelCheckpoint far = routing == "window" ? load_checkpoint(P.models / "far.ckpt") : near;
  Predictor pn(near), pf(far);
  SlidingWindowInference engine(pn, pf, icfg);

  fs::create_directories(P.inference);
  config::write_effective(P.inference, cfg);
  std::ofstream index(P.inference / "frames.csv");
  index << "sequence,timestamp,windows\n";
  const auto report = full_range_predict(
      refs.size(), [&](std::size_t i) { return load_polar_grid(pipeline::layer_path(P.prepared, refs[i], "radar")); },
      engine, cart_res, 0.0, [&](std::size_t i, const FramePrediction& fp) {
        const auto& r = refs[i];
        for (const char* l : {"probability", "occupancy", "cart_probability", "cart_occupancy"})
          fs::create_directories(P.inference / r.sequence / l);
        save_grid(pipeline::layer_path(P.inference, r, "probability"), fp.polar.probability);
        save_grid(pipeline::layer_path(P.inference, r, "occupancy"), fp.polar.occupancy);
        save_grid(pipeline::layer_path(P.inference, r, "cart_probability"), fp.cartesian_probability);
        save_grid(pipeline::layer_path(P.inference, r, "cart_occupancy"), fp.cartesian_occupancy);
        index << r.sequence << ',' << r.timestamp << ',' << fp.polar.offsets.size() << '\n';
      });
  const int n_range = pm.meta.at("n_range").get<int>();
  const auto offsets = window_offsets(n_range, icfg.window_bins, icfg.stride_bins);
  write_json(P.inference / "run_manifest.json",
             {{"split", split},
              {"routing", routing},
              {"window_bins", icfg.window_bins},
              {"stride_bins", icfg.stride_bins},
              {"combine", std::string(to_string(icfg.combine))},
              {"threshold", icfg.threshold},
              {"window_offsets", offsets},
              {"windows_per_frame", offsets.size()},
              {"models",
               {{"near", {{"path", fs::absolute(P.models / "near.ckpt").string()}, {"fingerprint", near.fingerprint}}},
                {"far", {{"path", fs::absolute(P.models / (routing == "window" ? "far.ckpt" : "near.ckpt")).string()},
                         {"fingerprint", far.fingerprint}}}}},
              {"timing",
               {{"frames", report.frames},
                {"windows", report.windows},
                {"seconds", report.seconds},
                {"frames_per_second", report.frames_per_second()}}}});
  char buf[128];
  std::snprintf(buf, sizeof buf, "infer: %zu frames, %zu windows/frame, %.2f frames/s", report.frames, offsets.size(),
                report.frames_per_second());
  say(opt, buf);
}

// ---------------------------------------------------------------------------
// eval

inline std::string gt_layer(const toml::table& cfg) {
  const auto g = get<std::string>(cfg, "eval", "gt");
  if (g == "filtered") return "gt_filtered";
  if (g == "raw") return "gt";
  if (g == "truth") return "truth";
  throw ConfigError("eval.gt must be 'filtered', 'raw' or 'truth'");
}

inline void write_rates_csv(const fs::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "region,fn_rate,fp_rate\n";
  for (const auto& r : records)
    out << r.region.n << ',' << detail::opt_str(r.fn_rate()) << ',' << detail::opt_str(r.fp_rate()) << '\n';
}

inline void cmd_eval(const toml::table& cfg, const RunOptions& opt) {
  const Paths P = resolve_paths(cfg);
  const int d = get<int>(cfg, "eval", "region_d");
  if (d < 1) throw ConfigError("eval.region_d must be >= 1");
  const float thr = static_cast<float>(get<double>(cfg, "eval", "threshold"));
  const std::string layer = gt_layer(cfg);
  require(P.prepared / "manifest.json", "prepared manifest");
  require(P.inference / "frames.csv", "inference index");
  const auto pm = pipeline::load_prepared_manifest(P.prepared);

  const auto idx = report::read_csv(P.inference / "frames.csv");
  std::vector<pipeline::FrameRef> refs;
  for (std::size_t i = 0; i < idx.rows.size(); ++i)
    refs.push_back({idx.text(i, "sequence"), std::stoll(idx.text(i, "timestamp")), ""});
  if (refs.empty()) throw InsufficientData("eval: inference index lists no frames");

  fs::create_directories(P.eval);
  config::write_effective(P.eval, cfg);
  std::optional<RegionEvaluator> ev, ev_truth;
  for (const auto& r : refs) {
    const PolarGrid pred = binarize(load_polar_grid(pipeline::layer_path(P.inference, r, "probability")), thr);
    const PolarGrid gt = load_polar_grid(pipeline::layer_path(P.prepared, r, layer));
    if (!ev) ev = RegionEvaluator::polar(d, gt);
    ev->add(pred.values, gt.values);
    const auto tpath = pipeline::layer_path(P.prepared, r, "truth");
    if (fs::exists(tpath)) {
      const PolarGrid truth = load_polar_grid(tpath);
      if (!ev_truth) ev_truth = RegionEvaluator::polar(d, truth);
      ev_truth->add(pred.values, truth.values);
    }
  }
  write_region_csv(P.eval / "regions.csv", ev->records(), "sliding_window_vs_" + layer);
  write_rates_csv(P.eval / "rates.csv", ev->records());
  if (ev_truth) write_region_csv(P.eval / "regions_truth.csv", ev_truth->records(), "sliding_window_vs_truth");

  ConfusionCounts total;
  for (const auto& r : ev->records()) total += r.counts;
  nlohmann::json summary = {{"frames", refs.size()}, {"gt", layer}, {"iou_aggregation", "micro"}};
  summary["iou"] = iou(total) ? nlohmann::json(*iou(total)) : nlohmann::json(nullptr);

  if (get<bool>(cfg, "eval", "extrapolation") && fs::exists(P.models / "polar_n0.ckpt") &&
      fs::exists(P.models / "cart_n0.ckpt")) {
    const int ed = pm.meta.at("region_d").get<int>();
    const int n_max = pm.meta.at("region_n_max").get<int>();
    std::vector<ExtrapolationFrame> frames;
    for (const auto& r : refs) {
      const auto f = pipeline::load_prepared_frame(P.prepared, r, true);
      if (f.cart_radar.values.empty()) throw std::runtime_error("eval: prepared frame lacks Cartesian layers");
      frames.push_back({f.radar, f.gt_filtered, f.cart_radar, f.cart_gt});
    }
    const auto res = run_extrapolation_experiment(frames, load_checkpoint(P.models / "polar_n0.ckpt"),
                                                  load_checkpoint(P.models / "cart_n0.ckpt"), ed, n_max, thr);
    write_region_csv(P.eval / "extrapolation_polar.csv", res.polar, "polar_n0");
    write_region_csv(P.eval / "extrapolation_cartesian.csv", res.cartesian, "cart_n0");
    write_summary_csv(P.eval / "extrapolation_summary.csv", res.summary);
    summary["extrapolation_mean_ratio"] =
        res.summary.mean_ratio ? nlohmann::json(*res.summary.mean_ratio) : nlohmann::json(nullptr);
  }
  write_json(P.eval / "summary.json", summary);
  say(opt, "eval: wrote " + P.eval.string());
}

// ---------------------------------------------------------------------------
// report

inline report::Chart region_chart(const report::Table& t, const std::string& title, const std::string& metric,
                                  const std::string& series) {
  report::Chart c;
  c.title = title;
  c.x_label = "region n";
  c.y_label = metric;
  c.y_min = 0.0;
  report::Series s{series, {}};
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (auto v = t.number(i, metric)) s.points.push_back({t.number(i, "region").value_or(0.0), *v});
  c.series.push_back(s);
  return c;
}

inline void cmd_report(const toml::table& cfg, const RunOptions& opt) {
  const Paths P = resolve_paths(cfg);
  const int n_gallery = get<int>(cfg, "report", "gallery_frames");
  if (n_gallery < 0) throw ConfigError("report.gallery_frames must be >= 0");
  require(P.eval / "regions.csv", "evaluation CSV");
  fs::create_directories(P.report / "gallery");
  config::write_effective(P.report, cfg);
  std::vector<std::string> written;

  const auto regions = report::read_csv(P.eval / "regions.csv");
  auto chart = region_chart(regions, "IoU by range region (sliding window)", "iou", "vs lidar GT");
  if (fs::exists(P.eval / "regions_truth.csv")) {
    const auto rt = report::read_csv(P.eval / "regions_truth.csv");
    chart.series.push_back(region_chart(rt, "", "iou", "vs oracle").series.front());
  }
  report::write_svg(P.report / "iou_by_region.svg", chart);
  written.push_back("iou_by_region.svg");

  auto rates = region_chart(regions, "FN / FP rate by range region", "fn_rate", "FN rate");
  rates.series.push_back(region_chart(regions, "", "fp_rate", "FP rate").series.front());
  rates.y_label = "rate";
  report::write_svg(P.report / "rates_by_region.svg", rates);
  written.push_back("rates_by_region.svg");

  if (fs::exists(P.eval / "extrapolation_polar.csv") && fs::exists(P.eval / "extrapolation_cartesian.csv")) {
    auto c = region_chart(report::read_csv(P.eval / "extrapolation_polar.csv"),
                          "Extrapolation from region 0: polar vs Cartesian", "iou", "polar");
    c.series.push_back(
        region_chart(report::read_csv(P.eval / "extrapolation_cartesian.csv"), "", "iou", "Cartesian").series.front());
    c.kind = report::ChartKind::bars;
    report::write_svg(P.report / "extrapolation.svg", c);
    written.push_back("extrapolation.svg");
  }

  report::Chart losses;
  losses.title = "Training loss";
  losses.x_label = "epoch";
  losses.y_label = "loss";
  for (const char* name : {"near", "far", "polar_n0", "cart_n0"}) {
    const auto p = P.models / (std::string(name) + "_log.csv");
    if (!fs::exists(p)) continue;
    const auto t = report::read_csv(p);
    report::Series tr{std::string(name) + " train", {}}, va{std::string(name) + " val", {}};
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double e = t.number(i, "epoch").value_or(0.0) + 1;
      if (auto v = t.number(i, "train_loss")) tr.points.push_back({e, *v});
      if (auto v = t.number(i, "val_loss")) va.points.push_back({e, *v});
    }
    losses.series.push_back(tr);
    losses.series.push_back(va);
  }
  if (!losses.series.empty()) {
    report::write_svg(P.report / "training_loss.svg", losses);
    written.push_back("training_loss.svg");
  }

  // Galleries: rank indexed frames by penetration and false-positive cells.
  struct Scored {
    pipeline::FrameRef ref;
    report::OverlayCounts counts;
  };
  std::vector<Scored> scored;
  if (n_gallery > 0 && fs::exists(P.inference / "frames.csv")) {
    const auto idx = report::read_csv(P.inference / "frames.csv");
    for (std::size_t i = 0; i < idx.rows.size(); ++i) {
      pipeline::FrameRef r{idx.text(i, "sequence"), std::stoll(idx.text(i, "timestamp")), ""};
      const auto truth_path = pipeline::layer_path(P.prepared, r, "truth");
      const PolarGrid pred = load_polar_grid(pipeline::layer_path(P.inference, r, "occupancy"));
      const PolarGrid gt = load_polar_grid(pipeline::layer_path(P.prepared, r, "gt_filtered"));
      const PolarGrid radar = load_polar_grid(pipeline::layer_path(P.prepared, r, "radar"));
      std::optional<PolarGrid> truth;
      if (fs::exists(truth_path)) truth = load_polar_grid(truth_path);
      Scored s{r, {}};
      report::overlay(radar.values, pred.values, gt.values, truth ? &truth->values : nullptr, &s.counts);
      scored.push_back(s);
    }
  }
  auto render = [&](const Scored& s, const std::string& file) {
    const PolarGrid radar = load_polar_grid(pipeline::layer_path(P.prepared, s.ref, "radar"));
    const double half = radar.max_range();
    const double res = half * 2.0 / 512.0;
    auto cart = [&](const std::string& layer, const fs::path& root) {
      return polar_to_cartesian(load_polar_grid(pipeline::layer_path(root, s.ref, layer)), res, half).values;
    };
    const auto truth_path = pipeline::layer_path(P.prepared, s.ref, "truth");
    std::optional<Raster> truth;
    if (fs::exists(truth_path)) truth = cart("truth", P.prepared);
    const Raster r = polar_to_cartesian(radar, res, half).values;
    const auto rgb = report::overlay(r, cart("occupancy", P.inference), cart("gt_filtered", P.prepared),
                                     truth ? &*truth : nullptr);
    png::write_rgb(P.report / "gallery" / file, r.cols(), r.rows(), rgb);
    written.push_back("gallery/" + file);
  };
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(n_gallery), scored.size());
  auto by = [&](auto key) {
    auto v = scored;
    std::stable_sort(v.begin(), v.end(), [&](const Scored& a, const Scored& b) { return key(a) > key(b); });
    v.resize(k);
    return v;
  };
  for (const auto& s : by([](const Scored& s) { return s.counts.penetration; }))
    render(s, "penetration_" + s.ref.sequence + "_" + std::to_string(s.ref.timestamp) + ".png");
  for (const auto& s : by([](const Scored& s) { return s.counts.false_positive; }))
    render(s, "false_positive_" + s.ref.sequence + "_" + std::to_string(s.ref.timestamp) + ".png");

  std::ofstream index(P.report / "index.md");
  index << "# radocc report\n\nIoU values are micro averages over summed counts.\n\n"
        << "Gallery colours: green = predicted and in lidar GT, yellow = predicted beyond an occluder (oracle only), "
        << "red = false positive, blue = missed lidar GT.\n\n";
  for (const auto& w : written) index << "- [" << w << "](" << w << ")\n";
  say(opt, "report: " + std::to_string(written.size()) + " artifacts in " + P.report.string());
}

}  // namespace radocc::cli
