#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace tpgan {

/// Mixes a base seed with a stream identifier (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// The single source of randomness threaded through every stochastic
/// operation. Copyable so callers can fork a stream deterministically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  Rng fork(std::uint64_t stream) { return Rng(derive_seed(engine_(), stream)); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tpgan
