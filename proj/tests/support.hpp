#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "tpgan/data.hpp"
#include "tpgan/nn/networks.hpp"
#include "tpgan/rng.hpp"
#include "tpgan/tensor.hpp"

namespace testing_support {

/// A 16x16 profile small enough for scalar oracles and finite differences.
inline tpgan::nn::Profile tiny_profile(int channels = 1, int num_classes = 3, int noise_dim = 6) {
  tpgan::nn::Profile p;
  p.name = "tiny";
  p.image_size = 16;
  p.channels = channels;
  p.num_classes = num_classes;
  p.noise_dim = noise_dim;
  p.discriminator_kernels = {3, 4, 4, 5};
  p.generator_kernels = {4, 3, 3};
  p.classifier_kernels = {3, 3, 4, 4};
  p.generator_seed_channels = 4;
  return p;
}

template <typename T>
tpgan::Tensor<T> random_tensor(int n, int h, int w, int c, tpgan::Rng& rng, double lo = -1.0, double hi = 1.0) {
  tpgan::Tensor<T> t(n, h, w, c);
  for (auto& v : t.values()) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
  return t;
}

template <typename T>
tpgan::Tensor<T> random_noise(int n, int dim, tpgan::Rng& rng) {
  tpgan::Tensor<T> t = tpgan::Tensor<T>::matrix(n, dim);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal());
  return t;
}

inline std::vector<int> random_labels(int n, int k, tpgan::Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
  return y;
}

/// Rescales every parameter so small networks produce non-trivial outputs.
template <typename T>
void scale_params(const std::vector<tpgan::nn::Param<T>*>& params, double factor) {
  for (auto* p : params)
    for (auto& v : p->value) v = static_cast<T>(v * factor);
}

template <typename T>
void zero_params(const std::vector<tpgan::nn::Param<T>*>& params) {
  for (auto* p : params)
    for (auto& v : p->value) v = T(0);
}

template <typename T>
std::uint64_t checksum(const std::vector<tpgan::nn::Param<T>*>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* p : params) {
    for (T v : p->value) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
      for (std::size_t i = 0; i < sizeof(T); ++i) h = (h ^ bytes[i]) * 1099511628211ULL;
    }
  }
  return h;
}

/// A dataset of `per_class` random images per class, ids in order.
inline tpgan::Dataset toy_dataset(std::vector<int> per_class, int size, int channels, std::uint64_t seed) {
  tpgan::Rng rng(seed);
  tpgan::Dataset d;
  d.height = d.width = size;
  d.channels = channels;
  std::int64_t id = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    d.class_ids.push_back(static_cast<int>(c));
    for (int i = 0; i < per_class[c]; ++i) {
      tpgan::Sample s;
      s.label = static_cast<int>(c);
      s.id = id;
      s.path = "images/" + std::to_string(id) + ".png";
      ++id;
      s.image.resize(static_cast<std::size_t>(size) * size * channels);
      for (auto& v : s.image) v = static_cast<float>(2.0 * rng.uniform() - 1.0);
      d.samples.push_back(std::move(s));
    }
  }
  return d;
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tpgan_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
