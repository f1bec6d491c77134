#pragma once

#include <cstdint>
#include <filesystem>

#include "tpgan/data.hpp"

namespace tpgan {

/// Procedural stand-in for a three-class apparel subset: class 0 short-sleeved
/// tops, class 1 long-sleeved tops, class 2 flared dresses. Sleeve length and
/// hem flare distributions overlap so the classes are not separable by a
/// single cue.
struct SyntheticOptions {
  int per_class = 1000;
  int size = 28;
  std::uint64_t seed = 0;
  /// Standard deviation of additive pixel noise, in [0, 1] intensity units.
  double noise = 0.06;
};

/// Samples carry ids 0..n-1 and paths "images/<id>.png".
Dataset synthesize_fashion(const SyntheticOptions& options);

/// Bilinear resize of every sample.
Dataset resize_dataset(const Dataset& dataset, int size);

/// Writes each sample as an 8-bit PNG under `directory` plus a manifest
/// `directory/dataset.manifest`; returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& directory, const Dataset& dataset);

}  // namespace tpgan
