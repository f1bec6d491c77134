#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tpgan/nn/layers.hpp"

namespace tpgan::nn {

struct StoredTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
  bool operator==(const StoredTensor&) const = default;
};

struct StoredSection {
  std::string name;
  std::vector<StoredTensor> tensors;
  bool operator==(const StoredSection&) const = default;
};

/// Self-describing parameter container. Binary layout (all little-endian):
///   "TPGANCK1" | u32 meta count | (str key, str value)* |
///   u32 section count | (str name, u32 tensor count,
///     (str name, u32 rank, u32 dims[rank], f32 data[prod(dims)])*)* |
///   u64 FNV-1a checksum of everything before it
/// where str is a u32 byte length followed by the bytes.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<StoredSection> sections;

  const StoredSection& section(const std::string& name) const;
  bool has_section(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

/// Writes to a temporary sibling and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws CorruptCheckpoint on malformed or truncated input.
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
StoredSection store_params(const std::string& section, const std::vector<Param<T>*>& params);

/// Loads values by position, checking names and shapes.
template <typename T>
void load_params(const StoredSection& section, const std::vector<Param<T>*>& params);

}  // namespace tpgan::nn
