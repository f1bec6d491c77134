#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tpgan/evaluation.hpp"

using namespace tpgan;
using testing_support::TempDir;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t p = 0; p < rows[t].size(); ++p) cm.add(static_cast<int>(t), static_cast<int>(p), rows[t][p]);
  return cm;
}

Eigen::MatrixXd gaussian_rows(int n, int d, std::uint64_t seed, double scale = 1.0, double shift = 0.0) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = shift + scale * rng.normal();
  return m;
}

GaussianSummary summary(Eigen::VectorXd mean, Eigen::MatrixXd cov) { return GaussianSummary{std::move(mean), std::move(cov)}; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(PrecisionRecall, SymmetricTwoByTwo) {
  const auto s = precision_recall(from_rows({{3, 1}, {1, 3}}));
  for (const auto& c : s.per_class) {
    EXPECT_DOUBLE_EQ(c.precision, 0.75);
    EXPECT_DOUBLE_EQ(c.recall, 0.75);
    EXPECT_DOUBLE_EQ(c.f_score, 0.75);
  }
  EXPECT_DOUBLE_EQ(s.macro.f_score, 0.75);
}

TEST(PrecisionRecall, NeverPredictedClassHasZeroPrecision) {
  const auto s = precision_recall(from_rows({{4, 0}, {2, 0}}));
  EXPECT_DOUBLE_EQ(s.per_class[1].precision, 0.0);
  EXPECT_DOUBLE_EQ(s.per_class[1].recall, 0.0);
  EXPECT_DOUBLE_EQ(s.per_class[1].f_score, 0.0);
  EXPECT_DOUBLE_EQ(s.per_class[0].precision, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(s.per_class[0].recall, 1.0);
}

TEST(PrecisionRecall, DiagonalIsPerfect) {
  const auto s = precision_recall(from_rows({{5, 0, 0}, {0, 2, 0}, {0, 0, 9}}));
  EXPECT_DOUBLE_EQ(s.macro.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.macro.recall, 1.0);
  EXPECT_DOUBLE_EQ(s.macro.f_score, 1.0);
}

TEST(PrecisionRecall, MacroFIsMeanOfPerClassF) {
  const auto s = precision_recall(from_rows({{10, 0, 0}, {5, 5, 0}, {9, 0, 1}}));
  double mean_f = 0.0;
  for (const auto& c : s.per_class) mean_f += c.f_score / 3.0;
  EXPECT_NEAR(s.macro.f_score, mean_f, 1e-15);
  EXPECT_GT(std::abs(s.macro.f_score - f_score(s.macro.precision, s.macro.recall)), 1e-3);
}

TEST(FScore, HandValues) {
  EXPECT_DOUBLE_EQ(f_score(0.25, 0.75), 0.375);
  EXPECT_DOUBLE_EQ(f_score(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f_score(0.3, 0.9), f_score(0.9, 0.3));
  EXPECT_DOUBLE_EQ(f_score(1.0, 1.0), 1.0);
}

TEST(Fid, IdenticalSetsAreZero) {
  const auto x = gaussian_rows(200, 4, 1);
  EXPECT_NEAR(fid(x, x), 0.0, 1e-9);
}

TEST(Fid, UnitMeanShiftInOneDimension) {
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 1.0;
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  EXPECT_NEAR(fid(summary(a, one), summary(b, one)), 1.0, 1e-12);
}

TEST(Fid, IdentityAgainstFourIdentity) {
  // tr(I) + tr(4I) - 2 tr(2I) = 2 + 8 - 8 in two dimensions.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd i2 = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_NEAR(fid(summary(zero, i2), summary(zero, 4.0 * i2)), 2.0, 1e-12);
}

TEST(Fid, NonCommutingCovariancesMatchClosedForm) {
  // For 2x2 SPD matrices, tr sqrt(M) = sqrt(tr M + 2 sqrt(det M)).
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 2.0, 0.5, 0.5, 1.0;
  b << 1.0, -0.3, -0.3, 3.0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd m = a * b;
  const double cross = std::sqrt(m.trace() + 2.0 * std::sqrt(m.determinant()));
  EXPECT_NEAR(fid(summary(zero, a), summary(zero, b)), a.trace() + b.trace() - 2.0 * cross, 1e-12);
}

TEST(Fid, SymmetricNonNegativeAndMonotone) {
  const auto x = gaussian_rows(300, 3, 2);
  const auto y = gaussian_rows(300, 3, 3, 2.0, 1.0);
  EXPECT_NEAR(fid(x, y), fid(y, x), 1e-9);
  double previous = fid(x, y);
  EXPECT_GT(previous, 0.0);
  for (double t : {0.75, 0.5, 0.25, 0.0}) {
    // Moving y toward x along the straight line shrinks the distance.
    const Eigen::MatrixXd z = x + t * (y - x);
    const double value = fid(x, z);
    EXPECT_GE(value, 0.0);
    EXPECT_LT(value, previous + 1e-12);
    previous = value;
  }
}

TEST(Fid, Errors) {
  EXPECT_THROW(fid(gaussian_rows(1, 2, 4), gaussian_rows(5, 2, 5)), Error);
  EXPECT_THROW(fid(gaussian_rows(5, 2, 4), gaussian_rows(5, 3, 5)), Error);
  Eigen::MatrixXd bad = gaussian_rows(5, 2, 6);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(fid(bad, gaussian_rows(5, 2, 7)), Error);
}

TEST(EvaluateClassifier, ConstantPredictorHasMacroRecallOneThird) {
  Rng rng(3);
  nn::Classifier<float> c(nn::Profile::desk(1, 3), rng);
  testing_support::zero_params(c.params());
  for (auto* p : c.params())
    if (p->name == "head.bias") p->value[0] = 1.0f;
  const Dataset test = testing_support::toy_dataset({7, 5, 4}, 32, 1, 11);
  const auto rec = evaluate_classifier(c, test);
  EXPECT_EQ(rec.confusion.total(), 16);
  EXPECT_EQ(rec.confusion.at(1, 0), 5);
  EXPECT_NEAR(rec.scores.macro.recall, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(rec.scores.per_class[0].precision, 7.0 / 16.0, 1e-15);
}

TEST(ExportFeatures, LayoutAndBitwiseReexport) {
  Rng rng(4);
  nn::Classifier<float> c(nn::Profile::desk(1, 3), rng);
  const auto images = testing_support::random_tensor<float>(5, 32, 32, 1, rng);
  const std::vector<int> labels{0, 1, 2, 1, 0};
  const std::vector<Origin> origin{Origin::Actual, Origin::Generated, Origin::Actual, Origin::Actual, Origin::Generated};
  TempDir dir("features");
  export_features(dir.path() / "a.tsv", c, images, labels, origin);
  export_features(dir.path() / "b.tsv", c, images, labels, origin);
  const std::string text = slurp(dir.path() / "a.tsv");
  EXPECT_EQ(text, slurp(dir.path() / "b.tsv"));

  const int dim = c.profile().classifier_feature_dim();
  const Eigen::MatrixXd feats = classifier_features(c, images);
  std::istringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, '\t');) cols.push_back(cell);
    ASSERT_EQ(static_cast<int>(cols.size()), dim + 2);
    for (int j = 0; j < dim; ++j) EXPECT_EQ(std::stof(cols[j]), static_cast<float>(feats(row, j)));
    EXPECT_EQ(std::stoi(cols[dim]), labels[row]);
    EXPECT_EQ(cols[dim + 1], origin[row] == Origin::Actual ? "actual" : "generated");
    ++row;
  }
  EXPECT_EQ(row, 5);
}
