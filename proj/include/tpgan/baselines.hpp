#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tpgan/data.hpp"

namespace tpgan {

/// Rows of `minority` are points (flattened images). k is clamped to n - 1.
struct OversampleRequest {
  Eigen::MatrixXd minority;
  int k = 5;
  int n_synthetic = 0;
  std::uint64_t seed = 0;
  /// Pins every interpolation gap instead of drawing it from U[0, 1].
  std::optional<double> fixed_gap;
};

/// Synthetic rows with their provenance: row s equals
/// minority[base[s]] + gap[s] * (minority[partner[s]] - minority[base[s]]).
struct OversampleResult {
  Eigen::MatrixXd points;
  std::vector<int> base;
  std::vector<int> partner;
  std::vector<double> gap;
};

/// Indices of the k nearest rows of `pool` to `query` by Euclidean distance,
/// nearest first, ties to the lower index; `exclude` is skipped.
std::vector<int> nearest_neighbors(const Eigen::MatrixXd& pool, const Eigen::VectorXd& query, int k, int exclude = -1);

OversampleResult smote(const OversampleRequest& request);

enum class BorderlineKind { Safe, Danger, Noise };
/// Neighbor census over minority followed by majority.
std::vector<BorderlineKind> borderline_census(const Eigen::MatrixXd& minority, const Eigen::MatrixXd& majority, int k);
/// Borderline-SMOTE type 1: danger points are the only bases, partners are
/// minority neighbors. Falls back to smote without danger points.
OversampleResult borderline_smote(const OversampleRequest& request, const Eigen::MatrixXd& majority);

/// Child counts for normalised weights: rounded shares, then the shortfall
/// goes to the highest weights and any excess is taken from the lowest.
std::vector<int> adasyn_allocation(std::span<const double> weights, int n_synthetic);
/// ADASYN; falls back to smote when no minority point has a majority neighbor.
OversampleResult adasyn(const OversampleRequest& request, const Eigen::MatrixXd& majority);

enum class OversampleMethod { Smote, BorderlineSmote, Adasyn };
OversampleMethod parse_oversample_method(std::string_view name);
std::string_view to_string(OversampleMethod method);

/// Tops every minority class of `train` up to the majority count with
/// synthetic samples (ids continue after the largest existing id, paths
/// "synthetic/<id>.png").
Dataset oversample_dataset(const Dataset& train, const ImbalanceSpec& spec, OversampleMethod method, int k,
                           std::uint64_t seed);

}  // namespace tpgan
