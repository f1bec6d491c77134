#include "tpgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

namespace tpgan {

namespace {
constexpr int kEvalChunk = 256;
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
  if (truth < 0 || truth >= k_ || predicted < 0 || predicted >= k_) {
    fail(Errc::InvalidArgument, "confusion entry outside the class range");
  }
  counts_[static_cast<std::size_t>(truth) * k_ + predicted] += count;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

double f_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

Scores precision_recall(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  if (k == 0) fail(Errc::InvalidArgument, "empty confusion matrix");
  Scores s;
  s.per_class.resize(k);
  for (int c = 0; c < k; ++c) {
    std::int64_t predicted = 0, actual = 0;
    for (int r = 0; r < k; ++r) predicted += cm.at(r, c);
    for (int p = 0; p < k; ++p) actual += cm.at(c, p);
    auto& cls = s.per_class[c];
    if (predicted > 0) {
      cls.precision = static_cast<double>(cm.at(c, c)) / predicted;
    } else {
      spdlog::debug("class {} never predicted; precision set to 0", c);
    }
    if (actual > 0) {
      cls.recall = static_cast<double>(cm.at(c, c)) / actual;
    } else {
      spdlog::debug("class {} absent from evaluation; recall set to 0", c);
    }
    cls.f_score = f_score(cls.precision, cls.recall);
    s.macro.precision += cls.precision / k;
    s.macro.recall += cls.recall / k;
    s.macro.f_score += cls.f_score / k;
  }
  return s;
}

GaussianSummary GaussianSummary::of(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) fail(Errc::TooFewPoints, "a Gaussian summary needs at least two rows");
  if (features.cols() < 1) fail(Errc::DegenerateFeatures, "features have no columns");
  GaussianSummary g;
  g.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  return g;
}

double fid(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.mean.size() != b.mean.size()) fail(Errc::ShapeMismatch, "feature dimensions differ");
  if (!a.covariance.allFinite() || !b.covariance.allFinite()) fail(Errc::DegenerateFeatures, "covariance is not finite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(a.covariance);
  const Eigen::VectorXd root_vals = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root_a = eig_a.eigenvectors() * root_vals.asDiagonal() * eig_a.eigenvectors().transpose();
  const Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_inner(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = eig_inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
  if (!std::isfinite(value)) fail(Errc::DegenerateFeatures, "FID is not finite");
  if (value < -1e-6) spdlog::warn("FID {} below the numerical floor, clamped to 0", value);
  return std::max(value, 0.0);
}

double fid(const Eigen::MatrixXd& real_features, const Eigen::MatrixXd& generated_features) {
  return fid(GaussianSummary::of(real_features), GaussianSummary::of(generated_features));
}

MetricsRecord evaluate_classifier(nn::Classifier<float>& classifier, const Dataset& test) {
  if (test.empty()) fail(Errc::InvalidArgument, "evaluation needs a non-empty test set");
  const int k = classifier.profile().num_classes;
  MetricsRecord record{ConfusionMatrix(k), {}, {}};
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < test.size(); begin += kEvalChunk) {
    idx.clear();
    for (std::size_t i = begin; i < std::min(test.size(), begin + kEvalChunk); ++i) idx.push_back(i);
    const auto out = classifier.forward(test.images(idx), nn::Phase::Inference);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto row = out.logits.row(static_cast<int>(r));
      const int pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      record.confusion.add(test.samples[idx[r]].label, pred);
    }
  }
  record.scores = precision_recall(record.confusion);
  return record;
}

Eigen::MatrixXd classifier_features(nn::Classifier<float>& classifier, const Tensor<float>& images) {
  const int dim = classifier.profile().classifier_feature_dim();
  Eigen::MatrixXd out(images.n(), dim);
  for (int begin = 0; begin < images.n(); begin += kEvalChunk) {
    const int count = std::min(kEvalChunk, images.n() - begin);
    const auto res = classifier.forward(slice_batch(images, begin, count), nn::Phase::Inference);
    for (int r = 0; r < count; ++r) {
      const auto row = res.features.row(r);
      for (int j = 0; j < dim; ++j) out(begin + r, j) = row[j];
    }
  }
  return out;
}

void export_features(const std::filesystem::path& path, nn::Classifier<float>& classifier, const Tensor<float>& images,
                     std::span<const int> labels, std::span<const Origin> origin) {
  if (images.n() == 0) fail(Errc::InvalidArgument, "feature export needs samples");
  if (labels.size() != static_cast<std::size_t>(images.n()) || origin.size() != labels.size()) {
    fail(Errc::ShapeMismatch, "feature export: labels/origin do not match the image count");
  }
  const Eigen::MatrixXd features = classifier_features(classifier, images);
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  char buf[32];
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", features(i, j));
      out << buf << '\t';
    }
    out << labels[i] << '\t' << (origin[i] == Origin::Actual ? "actual" : "generated") << '\n';
  }
  if (!out) fail(Errc::Io, "failed writing " + path.string());
}

}  // namespace tpgan
