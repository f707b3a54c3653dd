#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "radocc/error.hpp"
#include "radocc/grid.hpp"
#include "radocc/nn/unet.hpp"

namespace radocc {

using nn::NetSpec;

// ---------------------------------------------------------------------------
// Tversky loss

template <class T>
struct TverskyResult {
  double loss = 0.0;
  double tp = 0.0, fp = 0.0, fn = 0.0;
  std::vector<T> grad;  // d loss / d pred, empty unless requested
};

inline void check_tversky_weights(double alpha, double beta, double epsilon) {
  if (std::abs(alpha + beta - 1.0) > 1e-9) throw InvalidArgument("tversky_loss: alpha + beta must equal 1");
  if (alpha < 0.0 || beta < 0.0) throw InvalidArgument("tversky_loss: alpha and beta must be non-negative");
  if (!(epsilon >= 0.0)) throw InvalidArgument("tversky_loss: epsilon must be non-negative");
}

/// Soft Tversky loss over a whole batch:
///   1 - (TP + eps) / (TP + alpha FP + beta FN + eps)
/// with TP = sum p t, FP = sum p (1 - t), FN = sum (1 - p) t.
template <class T>
TverskyResult<T> tversky_loss(std::span<const T> pred, std::span<const T> target, double alpha, double beta,
                              double epsilon = 1.0, bool with_grad = false) {
  if (pred.size() != target.size()) throw InvalidArgument("tversky_loss: pred and target differ in size");
  check_tversky_weights(alpha, beta, epsilon);
  TverskyResult<T> r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], t = target[i];
    r.tp += p * t;
    r.fp += p * (1.0 - t);
    r.fn += (1.0 - p) * t;
  }
  const double num = r.tp + epsilon;
  const double den = r.tp + alpha * r.fp + beta * r.fn + epsilon;
  r.loss = den == 0.0 ? 0.0 : 1.0 - num / den;  // NaN must reach the caller
  if (with_grad) {
    r.grad.resize(pred.size());
    if (den != 0.0) {
      const double inv2 = 1.0 / (den * den);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double t = target[i];
        const double dden = t + alpha * (1.0 - t) - beta * t;
        r.grad[i] = static_cast<T>(-(t * den - num * dden) * inv2);
      }
    }
  }
  return r;
}

template <class T>
double tversky_loss_value(std::span<const T> pred, std::span<const T> target, double alpha, double beta,
                          double epsilon = 1.0) {
  return tversky_loss<T>(pred, target, alpha, beta, epsilon, false).loss;
}

// ---------------------------------------------------------------------------
// Training configuration and optimizer

enum class LossReduction { batch, image };

inline std::string_view to_string(LossReduction r) { return r == LossReduction::batch ? "batch" : "image"; }
inline LossReduction loss_reduction_from_string(std::string_view s) {
  if (s == "batch") return LossReduction::batch;
  if (s == "image") return LossReduction::image;
  throw InvalidArgument("unknown loss reduction '" + std::string(s) + "'");
}

struct TrainConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double epsilon = 1.0;
  double lr = 1e-3;
  double weight_decay = 1e-8;
  double momentum = 0.9;
  double rms_alpha = 0.99;
  double rms_eps = 1e-8;
  int batch_size = 10;
  int epochs = 20;
  double val_fraction = 0.10;
  std::uint64_t seed = 0;
  int train_range_bins = 300;
  LossReduction loss_reduction = LossReduction::batch;

  void validate() const {
    check_tversky_weights(alpha, beta, epsilon);
    if (!(epsilon > 0.0)) throw InvalidArgument("TrainConfig: epsilon must be positive");
    if (!(lr > 0.0)) throw InvalidArgument("TrainConfig: lr must be positive");
    if (weight_decay < 0.0) throw InvalidArgument("TrainConfig: weight_decay must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("TrainConfig: momentum must lie in [0,1)");
    if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw InvalidArgument("TrainConfig: epochs must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw InvalidArgument("TrainConfig: val_fraction must lie in [0,1)");
    if (train_range_bins < 1) throw InvalidArgument("TrainConfig: train_range_bins must be >= 1");
  }
};

/// RMSprop with momentum and L2 weight decay, following the update used by
/// PyTorch's torch.optim.RMSprop (non-centered).
class RMSprop {
 public:
  RMSprop(const std::vector<nn::Param*>& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
    for (const nn::Param* p : params_) {
      square_avg_.emplace_back(p->value.size(), 0.0f);
      momentum_buf_.emplace_back(p->value.size(), 0.0f);
    }
  }

  void step() {
    const float lr = static_cast<float>(cfg_.lr), wd = static_cast<float>(cfg_.weight_decay);
    const float a = static_cast<float>(cfg_.rms_alpha), m = static_cast<float>(cfg_.momentum);
    const float eps = static_cast<float>(cfg_.rms_eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      nn::Param& p = *params_[k];
      std::vector<float>& v = square_avg_[k];
      std::vector<float>& buf = momentum_buf_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const float g = p.grad[i] + wd * p.value[i];
        v[i] = a * v[i] + (1.0f - a) * g * g;
        const float step = g / (std::sqrt(v[i]) + eps);
        buf[i] = m > 0.0f ? m * buf[i] + step : step;
        p.value[i] -= lr * buf[i];
      }
    }
  }

 private:
  std::vector<nn::Param*> params_;
  TrainConfig cfg_;
  std::vector<std::vector<float>> square_avg_, momentum_buf_;
};

// ---------------------------------------------------------------------------
// Training data and checkpoints

/// One training image pair. `range_extent` is the largest range bin (exclusive,
/// measured from the sensor) that the sample covers; the data audit refuses
/// anything beyond TrainConfig::train_range_bins.
struct TrainingPair {
  Raster input;
  Raster target;
  int range_extent = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct ModelCheckpoint {
  NetSpec spec;
  TrainConfig config;
  std::string fingerprint;
  std::vector<EpochLog> history;
  int best_epoch = -1;
  std::size_t n_train = 0, n_val = 0;
  // Input calibration the model was trained on; 0 when unknown.
  int n_azimuth = 0;
  double range_resolution = 0.0;
  std::vector<std::vector<float>> params;
  std::vector<std::vector<float>> buffers;

  bool initialized() const { return !params.empty(); }
};

/// FNV-1a over the raw bytes of every sample, in order.
inline std::string dataset_fingerprint(const std::vector<TrainingPair>& data) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* ptr, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(ptr);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& s : data) {
    const int shape[4] = {s.input.rows(), s.input.cols(), s.target.rows(), s.target.cols()};
    mix(shape, sizeof shape);
    mix(s.input.data().data(), s.input.size() * sizeof(float));
    mix(s.target.data().data(), s.target.size() * sizeof(float));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Seeded disjoint split; returns (train indices, validation indices).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_val_split(std::size_t n, double val_fraction,
                                                                                    std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5eedba5eull);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (val_fraction > 0.0 && n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

namespace detail {

inline nn::Tensor stack_inputs(const std::vector<const Raster*>& rs) {
  nn::Tensor t(static_cast<int>(rs.size()), 1, rs.front()->rows(), rs.front()->cols());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (!rs[i]->same_shape(*rs.front())) throw InvalidArgument("batch images differ in shape");
    std::copy(rs[i]->data().begin(), rs[i]->data().end(), t.image(static_cast<int>(i)));
  }
  return t;
}

inline void sigmoid_inplace(std::vector<float>& v) {
  for (float& x : v) x = nn::sigmoid(x);
}

/// Loss and d loss / d logits for a batch.
inline double batch_loss(const nn::Tensor& logits, const nn::Tensor& target, const TrainConfig& cfg,
                         nn::Tensor* dlogits) {
  std::vector<float> p(logits.data.begin(), logits.data.end());
  sigmoid_inplace(p);
  const bool grad = dlogits != nullptr;
  if (grad) *dlogits = nn::Tensor(logits.n, logits.c, logits.h, logits.w);
  double loss = 0.0;
  auto apply = [&](std::size_t off, std::size_t n, double weight) {
    const auto r = tversky_loss<float>(std::span<const float>(p.data() + off, n),
                                       std::span<const float>(target.data.data() + off, n), cfg.alpha, cfg.beta,
                                       cfg.epsilon, grad);
    loss += weight * r.loss;
    if (grad)
      for (std::size_t i = 0; i < n; ++i) {
        const float pi = p[off + i];
        dlogits->data[off + i] = static_cast<float>(weight * r.grad[i] * pi * (1.0f - pi));
      }
  };
  if (cfg.loss_reduction == LossReduction::batch) {
    apply(0, p.size(), 1.0);
  } else {
    const std::size_t per = logits.image_size();
    for (int i = 0; i < logits.n; ++i) apply(static_cast<std::size_t>(i) * per, per, 1.0 / logits.n);
  }
  return loss;
}

inline void snapshot(nn::UNet& net, ModelCheckpoint& ck) {
  ck.params.clear();
  ck.buffers.clear();
  for (const nn::Param* p : net.params()) ck.params.push_back(p->value);
  for (const std::vector<float>* b : net.buffers()) ck.buffers.push_back(*b);
}

inline void restore(nn::UNet& net, const ModelCheckpoint& ck) {
  if (ck.params.size() != net.params().size() || ck.buffers.size() != net.buffers().size())
    throw InvalidArgument("checkpoint does not match network layout");
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    if (ck.params[i].size() != net.params()[i]->value.size())
      throw InvalidArgument("checkpoint parameter block " + std::to_string(i) + " has wrong size");
    net.params()[i]->value = ck.params[i];
  }
  for (std::size_t i = 0; i < ck.buffers.size(); ++i) {
    if (ck.buffers[i].size() != net.buffers()[i]->size())
      throw InvalidArgument("checkpoint buffer " + std::to_string(i) + " has wrong size");
    *net.buffers()[i] = ck.buffers[i];
  }
}

}  // namespace detail

struct TrainHooks {
  /// Called for every sample the optimizer consumes (after the range audit).
  std::function<void(std::size_t index, const TrainingPair&)> audit;
  /// Called after each epoch.
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains a fresh network. The returned checkpoint holds the weights from the
/// epoch with the lowest validation loss (training loss when there is no
/// validation split).
inline ModelCheckpoint train(const std::vector<TrainingPair>& data, const NetSpec& spec, const TrainConfig& cfg,
                             const TrainHooks& hooks = {}) {
  cfg.validate();
  spec.validate();
  if (data.empty()) throw InsufficientData("train: empty training set");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    if (!s.input.same_shape(s.target)) throw InvalidArgument("train: sample " + std::to_string(i) + " shape mismatch");
    if (s.range_extent <= 0 || s.range_extent > cfg.train_range_bins)
      throw InvalidArgument("train: sample " + std::to_string(i) + " reaches range bin " +
                            std::to_string(s.range_extent) + " beyond train_range_bins " +
                            std::to_string(cfg.train_range_bins));
  }

  auto [train_idx, val_idx] = train_val_split(data.size(), cfg.val_fraction, cfg.seed);
  nn::UNet net(spec, cfg.seed);
  RMSprop opt(net.params(), cfg);

  ModelCheckpoint best;
  best.spec = spec;
  best.config = cfg;
  best.fingerprint = dataset_fingerprint(data);
  best.n_train = train_idx.size();
  best.n_val = val_idx.size();
  double best_loss = std::numeric_limits<double>::infinity();

  auto run_batches = [&](const std::vector<std::size_t>& order, bool training, int epoch) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Raster*> in, tg;
      for (std::size_t k = b; k < e; ++k) {
        const TrainingPair& s = data[order[k]];
        if (training && hooks.audit) hooks.audit(order[k], s);
        in.push_back(&s.input);
        tg.push_back(&s.target);
      }
      const nn::Tensor x = detail::stack_inputs(in);
      const nn::Tensor t = detail::stack_inputs(tg);
      const nn::Tensor logits = net.forward(x, training);
      nn::Tensor dlogits;
      const double loss = detail::batch_loss(logits, t, cfg, training ? &dlogits : nullptr);
      if (!std::isfinite(loss))
        throw TrainingError("train: non-finite loss in epoch " + std::to_string(epoch), epoch);
      if (training) {
        net.zero_grad();
        net.backward(dlogits);
        opt.step();
      }
      total += loss * static_cast<double>(e - b);
      count += e - b;
    }
    return count ? total / static_cast<double>(count) : 0.0;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(epoch) + 1);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = run_batches(order, true, epoch);
    log.val_loss = val_idx.empty() ? log.train_loss : run_batches(val_idx, false, epoch);
    if (!std::isfinite(log.val_loss))
      throw TrainingError("train: non-finite validation loss in epoch " + std::to_string(epoch), epoch);
    best.history.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
    if (log.val_loss < best_loss) {
      best_loss = log.val_loss;
      best.best_epoch = epoch;
      detail::snapshot(net, best);
    }
  }
  return best;
}

inline void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  out.precision(9);
  for (const auto& e : history) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, u64 header length, JSON header, float32 blocks.

inline constexpr char kCheckpointMagic[8] = {'R', 'A', 'D', 'O', 'C', 'C', 'K', '1'};

inline nlohmann::json to_json(const NetSpec& s) {
  return {{"depth", s.depth},
          {"base_channels", s.base_channels},
          {"azimuth_padding", std::string(nn::to_string(s.azimuth_padding))},
          {"upsample", std::string(nn::to_string(s.upsample))},
          {"in_channels", s.in_channels}};
}

inline NetSpec net_spec_from_json(const nlohmann::json& j) {
  NetSpec s;
  s.depth = j.at("depth").get<int>();
  s.base_channels = j.at("base_channels").get<int>();
  s.azimuth_padding = nn::azimuth_padding_from_string(j.at("azimuth_padding").get<std::string>());
  s.upsample = nn::upsample_from_string(j.at("upsample").get<std::string>());
  s.in_channels = j.value("in_channels", 1);
  return s;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"epsilon", c.epsilon},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"momentum", c.momentum},
          {"rms_alpha", c.rms_alpha},
          {"rms_eps", c.rms_eps},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"val_fraction", c.val_fraction},
          {"seed", c.seed},
          {"train_range_bins", c.train_range_bins},
          {"loss_reduction", std::string(to_string(c.loss_reduction))}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.rms_alpha = j.at("rms_alpha").get<double>();
  c.rms_eps = j.at("rms_eps").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.val_fraction = j.at("val_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_range_bins = j.at("train_range_bins").get<int>();
  c.loss_reduction = loss_reduction_from_string(j.at("loss_reduction").get<std::string>());
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ck) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian floats");
  if (!ck.initialized()) throw StateError("save_checkpoint: checkpoint holds no parameters");
  nlohmann::json h;
  h["format"] = "radocc-checkpoint";
  h["version"] = 1;
  h["net"] = to_json(ck.spec);
  h["train"] = to_json(ck.config);
  h["fingerprint"] = ck.fingerprint;
  h["best_epoch"] = ck.best_epoch;
  h["n_train"] = ck.n_train;
  h["n_val"] = ck.n_val;
  h["n_azimuth"] = ck.n_azimuth;
  h["range_resolution"] = ck.range_resolution;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : ck.history) hist.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  h["history"] = hist;
  std::vector<std::size_t> ps, bs;
  for (const auto& p : ck.params) ps.push_back(p.size());
  for (const auto& b : ck.buffers) bs.push_back(b.size());
  h["param_sizes"] = ps;
  h["buffer_sizes"] = bs;
  const std::string header = h.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto* group : {&ck.params, &ck.buffers})
    for (const auto& v : *group)
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!out) throw std::runtime_error("error writing checkpoint " + path.string());
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw ParseError(path.string() + ": not a checkpoint file");
  if (len > (1ull << 30)) throw ParseError(path.string() + ": corrupt header length");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError(path.string() + ": truncated header");
  ModelCheckpoint ck;
  try {
    const auto h = nlohmann::json::parse(header);
    ck.spec = net_spec_from_json(h.at("net"));
    ck.config = train_config_from_json(h.at("train"));
    ck.fingerprint = h.at("fingerprint").get<std::string>();
    ck.best_epoch = h.at("best_epoch").get<int>();
    ck.n_train = h.at("n_train").get<std::size_t>();
    ck.n_val = h.at("n_val").get<std::size_t>();
    ck.n_azimuth = h.value("n_azimuth", 0);
    ck.range_resolution = h.value("range_resolution", 0.0);
    for (const auto& e : h.at("history"))
      ck.history.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("val_loss").get<double>()});
    for (std::size_t n : h.at("param_sizes").get<std::vector<std::size_t>>()) ck.params.emplace_back(n);
    for (std::size_t n : h.at("buffer_sizes").get<std::vector<std::size_t>>()) ck.buffers.emplace_back(n);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  }
  for (auto* group : {&ck.params, &ck.buffers})
    for (auto& v : *group) {
      in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
      if (!in) throw ParseError(path.string() + ": truncated parameter data");
    }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path.string() + ": trailing bytes");
  return ck;
}

// ---------------------------------------------------------------------------
// Inference

/// Evaluation-mode network built from a checkpoint.
class Predictor {
 public:
  explicit Predictor(const ModelCheckpoint& ck) {
    if (!ck.initialized()) throw StateError("predict: checkpoint is not initialized");
    net_ = std::make_unique<nn::UNet>(ck.spec, 0);
    detail::restore(*net_, ck);
    n_azimuth_ = ck.n_azimuth;
    range_resolution_ = ck.range_resolution;
  }

  const NetSpec& spec() const { return net_->spec(); }

  /// Throws if the grid's calibration differs from the training data's.
  void check_calibration(const PolarGrid& g) const {
    if (n_azimuth_ > 0 && g.n_azimuth() != n_azimuth_)
      throw InvalidArgument("model trained on " + std::to_string(n_azimuth_) + " azimuths, input has " +
                            std::to_string(g.n_azimuth()));
    if (range_resolution_ > 0.0 && std::abs(g.range_resolution - range_resolution_) > 1e-9)
      throw InvalidArgument("model trained at range resolution " + std::to_string(range_resolution_) +
                            " m, input has " + std::to_string(g.range_resolution));
  }

  /// Probabilities for a batch of equally shaped images. Images smaller than
  /// the network's minimum extent are zero padded and cropped back.
  std::vector<Raster> predict(const std::vector<const Raster*>& inputs) {
    if (inputs.empty()) return {};
    const int h = inputs.front()->rows(), w = inputs.front()->cols();
    const int m = net_->min_extent();
    nn::Tensor x = detail::stack_inputs(inputs);
    if (h < m || w < m) x = nn::pad_to(x, std::max(h, m), std::max(w, m));
    nn::Tensor y = net_->forward(x, false);
    if (y.h != h || y.w != w) y = nn::crop_from(y, h, w);
    std::vector<Raster> out;
    out.reserve(inputs.size());
    for (int i = 0; i < y.n; ++i) {
      Raster r(h, w);
      std::transform(y.image(i), y.image(i) + y.image_size(), r.data().begin(), [](float z) { return nn::sigmoid(z); });
      out.push_back(std::move(r));
    }
    return out;
  }

  Raster predict(const Raster& input) { return std::move(predict(std::vector<const Raster*>{&input}).front()); }

  PolarGrid predict(const PolarGrid& window) {
    if (window.kind != GridKind::power) throw InvalidArgument("predict: input must be a power grid");
    check_calibration(window);
    PolarGrid out = window;
    out.kind = GridKind::probability;
    out.values = predict(window.values);
    return out;
  }

  CartesianGrid predict(const CartesianGrid& image) {
    if (image.kind != GridKind::power) throw InvalidArgument("predict: input must be a power grid");
    CartesianGrid out = image;
    out.kind = GridKind::probability;
    out.values = predict(image.values);
    return out;
  }

 private:
  std::unique_ptr<nn::UNet> net_;
  int n_azimuth_ = 0;
  double range_resolution_ = 0.0;
};

inline PolarGrid predict(const ModelCheckpoint& ck, const PolarGrid& window) { return Predictor(ck).predict(window); }

}  // namespace radocc
