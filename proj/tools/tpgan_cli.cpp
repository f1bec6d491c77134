// Command-line front end: synth, prepare, train, baseline, generate, report.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "tpgan/config.hpp"
#include "tpgan/experiment.hpp"

namespace {

using tpgan::ExperimentConfig;

/// Registers --<key> for every configuration key plus --config.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "Configuration file (flat 'section.key = value' lines)");
    for (const auto& key : tpgan::config_keys()) {
      cmd.add_option("--" + key, overrides[key], "Overrides " + key);
    }
  }

  ExperimentConfig resolve(const CLI::App& cmd) const {
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = tpgan::load_config(config_file);
    for (const auto& [key, value] : overrides) {
      if (cmd.count("--" + key) > 0) tpgan::set_config_value(cfg, key, value);
    }
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-player GAN augmentation for imbalanced image classification"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn or error");

  auto* synth = app.add_subcommand("synth", "Write a procedural three-class apparel dataset");
  std::string synth_dir = "data/synthetic";
  int synth_per_class = 1000, synth_size = 28;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_dir, "Output directory");
  synth->add_option("--per-class", synth_per_class, "Images per class");
  synth->add_option("--size", synth_size, "Image side length");
  synth->add_option("--seed", synth_seed, "Random seed");

  ConfigFlags prepare_flags, train_flags, baseline_flags;
  auto* prepare = app.add_subcommand("prepare", "Build the imbalanced train/test split");
  prepare_flags.attach(*prepare);
  auto* train = app.add_subcommand("train", "Run the configured method for every repetition");
  train_flags.attach(*train);
  auto* baseline = app.add_subcommand("baseline", "Oversample the training split (smote, b-smote, adasyn) only");
  baseline_flags.attach(*baseline);

  auto* generate = app.add_subcommand("generate", "Sample images from a trained generator");
  std::string checkpoint, gen_dir = "generated";
  int gen_class = 0, gen_count = 0;
  std::uint64_t gen_seed = 0;
  generate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  generate->add_option("--class", gen_class, "Class label as written in the manifests")->required();
  generate->add_option("--count", gen_count, "Number of images")->required();
  generate->add_option("--seed", gen_seed, "Noise seed");
  generate->add_option("--out", gen_dir, "Output directory");

  auto* report = app.add_subcommand("report", "Plot and tabulate one or more run manifests");
  std::vector<std::string> manifests;
  std::string report_dir = "report";
  report->add_option("manifests", manifests, "manifest.json files")->required();
  report->add_option("--out", report_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (synth->parsed()) {
      tpgan::cmd_synth(synth_dir, synth_per_class, synth_size, synth_seed);
    } else if (prepare->parsed()) {
      tpgan::cmd_prepare(prepare_flags.resolve(*prepare));
    } else if (train->parsed()) {
      const auto cfg = train_flags.resolve(*train);
      const auto manifest = tpgan::cmd_train(cfg);
      std::cout << (tpgan::resolve_output_dir(cfg.output_dir) / cfg.method / "manifest.json").string() << '\n';
    } else if (baseline->parsed()) {
      std::cout << tpgan::cmd_baseline(baseline_flags.resolve(*baseline)).string() << '\n';
    } else if (generate->parsed()) {
      const auto files = tpgan::cmd_generate(checkpoint, gen_class, gen_count, gen_seed, gen_dir);
      std::cout << files.size() << " images written to " << gen_dir << '\n';
    } else if (report->parsed()) {
      std::vector<std::filesystem::path> paths(manifests.begin(), manifests.end());
      tpgan::cmd_report(paths, report_dir);
      std::cout << "report written to " << report_dir << '\n';
    }
  } catch (const tpgan::Error& e) {
    spdlog::error("{}", e.what());
    return tpgan::exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
