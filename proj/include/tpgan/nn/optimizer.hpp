#pragma once

#include <cstdint>
#include <vector>

#include "tpgan/nn/layers.hpp"

namespace tpgan::nn {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

/// Adaptive moment estimation with bias correction. Moment buffers are bound
/// positionally to the parameter list passed on the first step.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Param<T>*>& params);

  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

  /// First/second moments as parameters named "<param>.m" / "<param>.v",
  /// for checkpointing.
  std::vector<Param<T>> export_state(const std::vector<Param<T>*>& params) const;
  void import_state(const std::vector<Param<T>*>& params, const std::vector<Param<T>>& state, std::int64_t steps);

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::vector<AlignedVector<T>> m_, v_;
};

}  // namespace tpgan::nn
