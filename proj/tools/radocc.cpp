// radocc: synthetic data, ground truth, training, inference, evaluation and
// reporting for radar occupancy prediction.

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "radocc/commands.hpp"

namespace {

struct Common {
  std::string config_file;
  std::string preset;
  std::string root;
  std::vector<std::string> overrides;
  int workers = 0;
  long long seed = -1;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "TOML config file")->check(CLI::ExistingFile);
  sub->add_option("--preset", c.preset, "Built-in defaults: tiny or paper")->check(CLI::IsMember({"tiny", "paper"}));
  sub->add_option("--root", c.root, "Run directory (overrides paths.root)");
  sub->add_option("-s,--set", c.overrides, "Override a config value, e.g. train.epochs=5 (repeatable)");
  sub->add_option("-j,--workers", c.workers, "Cap on worker threads (default: all cores)")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "Seed for synth and train")->check(CLI::NonNegativeNumber);
  sub->add_flag("-q,--quiet", c.quiet, "Suppress progress messages");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar occupancy prediction pipeline"};
  app.require_subcommand(1);
  Common common;

  struct Cmd {
    const char* name;
    const char* help;
    void (*run)(const toml::table&, const radocc::cli::RunOptions&);
  };
  const Cmd cmds[] = {
      {"synth", "Simulate a synthetic radar/lidar dataset", radocc::cli::cmd_synth},
      {"prepare", "Build lidar ground truth and apply the radar-visibility filter", radocc::cli::cmd_prepare},
      {"train", "Train near, far and extrapolation models", radocc::cli::cmd_train},
      {"infer", "Sliding-window inference over a split", radocc::cli::cmd_infer},
      {"eval", "Region-wise IoU, FN/FP rates and the extrapolation experiment", radocc::cli::cmd_eval},
      {"report", "Plots and galleries from CSV and PNG artifacts", radocc::cli::cmd_report},
  };

  bool no_filter = false;
  double threshold = -1.0;
  std::vector<CLI::App*> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, common);
    subs.push_back(sub);
  }
  subs[1]->add_flag("--no-visibility-filter", no_filter, "Keep all lidar cells (ablation)");
  subs[3]->add_option("--threshold", threshold, "Binarization threshold")->check(CLI::Range(0.0, 1.0));
  subs[4]->add_option("--threshold", threshold, "Binarization threshold")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::size_t which = 0;
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) which = i;
  const std::string name = cmds[which].name;

  std::vector<std::string> overrides;
  if (!common.root.empty()) overrides.push_back("paths.root=" + common.root);
  if (common.seed >= 0) {
    overrides.push_back("synth.seed=" + std::to_string(common.seed));
    overrides.push_back("train.seed=" + std::to_string(common.seed));
  }
  if (no_filter) overrides.push_back("prepare.visibility_filter=false");
  if (threshold >= 0.0) overrides.push_back(name + ".threshold=" + std::to_string(threshold));
  overrides.insert(overrides.end(), common.overrides.begin(), common.overrides.end());

  radocc::cli::RunOptions opt;
  opt.workers = common.workers > 0 ? common.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  opt.quiet = common.quiet;

  try {
    const char* cache = std::getenv("RADOCC_CACHE_DIR");
    const toml::table cfg = radocc::config::load(common.config_file, common.preset, overrides, cache ? cache : "");
    cmds[which].run(cfg, opt);
  } catch (const radocc::ConfigError& e) {
    std::cerr << "radocc " << name << ": config error: " << e.what() << '\n';
    return 2;
  } catch (const radocc::TrainingError& e) {
    std::cerr << "radocc " << name << ": training aborted at epoch " << e.epoch() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "radocc " << name << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
