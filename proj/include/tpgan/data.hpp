#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpgan/rng.hpp"
#include "tpgan/tensor.hpp"

namespace tpgan {

enum class Origin : std::uint8_t { Actual, Generated };

/// One labeled image in [-1, 1], HWC. `label` is the dataset's compact class
/// index; `id` identifies the sample across splits.
struct Sample {
  std::vector<float> image;
  int label = 0;
  std::int64_t id = 0;
  std::string path;
};

/// Samples of equal geometry. class_ids maps compact labels back to the
/// labels written in manifests.
struct Dataset {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<int> class_ids;
  std::vector<Sample> samples;

  int num_classes() const { return static_cast<int>(class_ids.size()); }
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Compact index of a manifest label; InvalidArgument if absent.
  int class_index(int class_id) const;
  std::vector<int> class_counts() const;
  std::vector<int> labels() const;
  /// Stacks the selected samples (all when indices is empty) into n x H x W x C.
  Tensor<float> images(std::span<const std::size_t> indices = {}) const;
  /// Checks the pixel range and label bounds of every sample.
  void validate() const;
};

/// Reads a manifest ("<relative path>\t<label>" per line, '#' comments) and
/// every image it names, resized to image_size x image_size with `channels`
/// channels (0 keeps the first image's channel count).
Dataset load_dataset(const std::filesystem::path& manifest, int image_size, int channels = 0);
/// Writes a manifest whose paths are relative to the manifest's directory.
void write_manifest(const std::filesystem::path& manifest, const Dataset& dataset);

struct ImbalanceSpec {
  int majority_class = 0;
  std::vector<int> minority_classes;
  double balanced_ratio = 0.1;
  int majority_count = 800;
  std::uint64_t seed = 0;
  /// Explicit minority count; overrides round(balanced_ratio * majority_count).
  std::optional<int> minority_count_override;

  int minority_count() const;
  void validate() const;
  bool operator==(const ImbalanceSpec&) const = default;
};

struct Split {
  Dataset train;
  Dataset test;
};

/// Draws majority_count majority samples and minority_count samples of each
/// minority class without replacement; everything else of those classes goes
/// to test. Both outputs use the involved classes, ascending, as class_ids.
Split build_imbalanced_split(const Dataset& dataset, const ImbalanceSpec& spec);

struct Batch {
  Tensor<float> images;
  std::vector<int> labels;
  std::vector<Origin> origin;

  int size() const { return static_cast<int>(labels.size()); }
  std::vector<int> class_counts(int num_classes) const;
};

/// m samples uniformly without replacement; BatchTooLarge if m > |train|.
Batch sample_actual_batch(const Dataset& train, int m, Rng& rng);

/// Generated samples per class needed to lift every minority class to the
/// largest per-class count of actual_labels. Zero for other classes.
std::vector<int> compute_generation_counts(std::span<const int> actual_labels, int num_classes,
                                           std::span<const int> minority_classes);

/// The labels a generator must be asked for, class by class, to realise counts.
std::vector<int> expand_counts(std::span<const int> counts);

/// Concatenates actual then generated rows; ImbalancedAssembly unless every
/// one of the num_classes classes ends with the same count.
Batch assemble_balanced_batch(const Batch& actual, const Batch& generated, int num_classes);

}  // namespace tpgan
