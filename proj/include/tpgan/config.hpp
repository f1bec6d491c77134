#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tpgan/data.hpp"
#include "tpgan/training.hpp"

namespace tpgan {

/// Everything an experiment needs, persisted as flat "section.key = value"
/// lines.
struct ExperimentConfig {
  std::filesystem::path dataset_manifest;
  /// 0 keeps the channel count of the first image.
  int dataset_channels = 0;
  ImbalanceSpec split;
  TrainConfig train;
  /// baseline, smote, b-smote, adasyn, gan-v1, gan-v2 or gan-v3.
  std::string method = "gan-v3";
  int repetitions = 1;
  std::filesystem::path output_dir = "runs";
  /// Neighbor count of the oversampling baselines.
  int neighbors = 5;
  /// Images per class for FID, when available.
  int fid_samples = 1500;

  /// Checks every field before any compute; throws Config.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

bool is_gan_method(const std::string& method);
bool is_oversampling_method(const std::string& method);
/// The classifier training regime a method implies (baseline for the
/// oversampling methods, which train on a static augmented set).
Variant variant_for_method(const std::string& method);

/// Keys in serialisation order.
std::vector<std::string> config_keys();
std::string get_config_value(const ExperimentConfig& config, const std::string& key);
/// Throws Config on an unknown key or an unparsable value.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// Resolves a relative output directory under $TPGAN_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

}  // namespace tpgan
