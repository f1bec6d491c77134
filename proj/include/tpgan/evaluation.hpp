#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tpgan/data.hpp"
#include "tpgan/nn/networks.hpp"

namespace tpgan {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0) : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  void add(int truth, int predicted, std::int64_t count = 1);
  std::int64_t at(int truth, int predicted) const { return counts_[static_cast<std::size_t>(truth) * k_ + predicted]; }
  int num_classes() const { return k_; }
  std::int64_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

/// Per-class scores and their unweighted means. macro.f_score is the mean of
/// per-class F, not the harmonic mean of the macro precision and recall.
struct Scores {
  std::vector<ClassScores> per_class;
  ClassScores macro;
};

/// Zero denominators give 0 and are logged.
Scores precision_recall(const ConfusionMatrix& cm);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f_score(double precision, double recall);

/// Mean and unbiased covariance of a feature set.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  /// Rows are observations; TooFewPoints below two rows.
  static GaussianSummary of(const Eigen::MatrixXd& features);
};

/// Frechet distance between two Gaussians. The trace of the cross term is
/// the sum of square roots of the eigenvalues of A^1/2 B A^1/2, negative
/// eigenvalues clamped to 0; the result is clamped at 0.
double fid(const GaussianSummary& a, const GaussianSummary& b);
double fid(const Eigen::MatrixXd& real_features, const Eigen::MatrixXd& generated_features);

struct MetricsRecord {
  ConfusionMatrix confusion;
  Scores scores;
  /// Filled by callers that evaluate a generator; empty otherwise.
  std::vector<double> fid_per_class;
};

/// Argmax predictions in inference mode, evaluated in fixed-size chunks.
MetricsRecord evaluate_classifier(nn::Classifier<float>& classifier, const Dataset& test);

/// Penultimate activations, one row per image.
Eigen::MatrixXd classifier_features(nn::Classifier<float>& classifier, const Tensor<float>& images);

/// Tab-separated rows: F feature values, label, origin ("actual" or
/// "generated"). Values are printed with round-trip precision.
void export_features(const std::filesystem::path& path, nn::Classifier<float>& classifier, const Tensor<float>& images,
                     std::span<const int> labels, std::span<const Origin> origin);

}  // namespace tpgan
