#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tpgan/config.hpp"
#include "tpgan/data.hpp"
#include "tpgan/evaluation.hpp"
#include "tpgan/training.hpp"

namespace tpgan {

/// One finished run of one method at one seed.
struct RunRecord {
  std::string method;
  std::uint64_t seed = 0;
  MetricsRecord metrics;
  std::vector<EpochLog> log;
  double seconds = 0.0;
  /// Empty when the run was kept in memory.
  std::filesystem::path dir;
};

/// Per-class FID between real images of each class (up to `per_class`,
/// chosen by a seeded shuffle) and as many generated images, measured on the
/// reference classifier's features.
std::vector<double> class_fid(nn::Classifier<float>& reference, nn::Generator<float>& generator,
                              const Dataset& real_pool, int per_class, Rng& rng);

/// A classifier trained on class-balanced draws of real training data only;
/// its features define FID for every method at that seed.
nn::Classifier<float> train_reference_classifier(const Dataset& train, const TrainConfig& config);

/// Runs methods on one split. Pretrained autoencoders and reference
/// classifiers are shared between methods at the same seed; both depend only
/// on the split, the configuration and the seed, so sharing changes no result.
class ExperimentSession {
 public:
  ExperimentSession(Split split, ExperimentConfig config);

  /// `run_dir`, when given, receives checkpoint.tpck, training_log.csv and
  /// metrics.csv.
  RunRecord run(const std::string& method, std::uint64_t seed,
                const std::optional<std::filesystem::path>& run_dir = std::nullopt);

  const Split& split() const { return split_; }
  const ExperimentConfig& config() const { return config_; }

 private:
  const nn::Autoencoder<float>& pretrained(const TrainConfig& config);
  nn::Classifier<float>& reference(const TrainConfig& config);

  Split split_;
  Dataset real_pool_;
  ExperimentConfig config_;
  std::map<std::uint64_t, nn::Autoencoder<float>> pretrained_;
  std::map<std::uint64_t, nn::Classifier<float>> reference_;
};

/// Header plus one row per class: variant, seed, balanced_ratio, class,
/// precision, recall, f_score, fid (empty when no generator was involved).
std::string metrics_csv(const std::vector<RunRecord>& runs, const Split& split, double balanced_ratio);
/// One macro row per run followed by a mean row.
std::string summary_csv(const std::vector<RunRecord>& runs, double balanced_ratio);

struct RunManifestEntry {
  std::string method;
  std::uint64_t seed = 0;
  std::filesystem::path metrics;
  std::filesystem::path training_log;
  std::filesystem::path checkpoint;
  double seconds = 0.0;
};

struct RunManifest {
  std::string config_text;
  std::vector<std::uint64_t> seeds;
  std::vector<RunManifestEntry> runs;
  std::filesystem::path metrics;
  std::filesystem::path summary;
};

/// Writes JSON; Io if any referenced file is missing.
void write_run_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_run_manifest(const std::filesystem::path& path);

void cmd_synth(const std::filesystem::path& out_dir, int per_class, int size, std::uint64_t seed);
/// Writes split/train.manifest, split/test.manifest and split/summary.txt.
Split cmd_prepare(const ExperimentConfig& config);
RunManifest cmd_train(const ExperimentConfig& config);
/// Writes gradient-norm and metric plots, a consolidated CSV and a text
/// summary into out_dir.
void cmd_report(const std::vector<std::filesystem::path>& manifests, const std::filesystem::path& out_dir);
/// Writes `count` PNGs conditioned on the manifest label `class_id` and a
/// manifest listing them. Returns the image paths.
std::vector<std::filesystem::path> cmd_generate(const std::filesystem::path& checkpoint, int class_id, int count,
                                                std::uint64_t seed, const std::filesystem::path& out_dir);
/// Oversamples the prepared training split and writes the augmented manifest
/// with its synthetic images.
std::filesystem::path cmd_baseline(const ExperimentConfig& config);

}  // namespace tpgan
