#include <gtest/gtest.h>

#include "oracle/geometry.hpp"
#include "support.hpp"
#include "tpgan/baselines.hpp"

using namespace tpgan;

namespace {

Eigen::MatrixXd random_points(int n, int d, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = shift + rng.normal();
  return m;
}

}  // namespace

TEST(Smote, OneDimensionalMidpoint) {
  OversampleRequest r;
  r.minority = Eigen::MatrixXd(2, 1);
  r.minority << 0.0, 10.0;
  r.k = 1;
  r.n_synthetic = 4;
  r.fixed_gap = 0.5;
  const auto out = smote(r);
  ASSERT_EQ(out.points.rows(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.points(i, 0), 5.0);
}

TEST(Smote, IdenticalPointsReproduceThemselves) {
  OversampleRequest r;
  r.minority = Eigen::MatrixXd::Constant(5, 3, 0.25);
  r.n_synthetic = 7;
  const auto out = smote(r);
  EXPECT_TRUE(out.points.isApproxToConstant(0.25));
}

TEST(Smote, CountDeterminismAndGeometry) {
  OversampleRequest r;
  r.minority = random_points(12, 6, 1);
  r.n_synthetic = 200;
  r.seed = 9;
  const auto a = smote(r);
  const auto b = smote(r);
  EXPECT_EQ(a.points.rows(), 200);
  EXPECT_EQ(a.points, b.points);
  const auto rep = oracle::check_segments(r.minority, a);
  EXPECT_LT(rep.worst_residual, 1e-9);
  EXPECT_TRUE(rep.inside_box);
  EXPECT_TRUE(rep.on_segment);
}

TEST(Smote, PartnersAreAmongNearestNeighbors) {
  OversampleRequest r;
  r.minority = random_points(10, 2, 2);
  r.k = 3;
  r.n_synthetic = 50;
  const auto out = smote(r);
  for (int s = 0; s < 50; ++s) {
    const auto nn = nearest_neighbors(r.minority, r.minority.row(out.base[s]).transpose(), 3, out.base[s]);
    EXPECT_NE(std::find(nn.begin(), nn.end(), out.partner[s]), nn.end());
  }
}

TEST(Smote, BasesAreCycled) {
  OversampleRequest r;
  r.minority = random_points(5, 2, 3);
  r.n_synthetic = 15;
  const auto out = smote(r);
  std::vector<int> uses(5, 0);
  for (int b : out.base) ++uses[b];
  for (int u : uses) EXPECT_EQ(u, 3);
}

TEST(Smote, TooFewPoints) {
  OversampleRequest r;
  r.minority = Eigen::MatrixXd::Zero(1, 2);
  r.n_synthetic = 1;
  try {
    smote(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewPoints);
  }
}

TEST(NearestNeighbors, TiesGoToLowerIndex) {
  Eigen::MatrixXd pool(4, 1);
  pool << 1.0, -1.0, 1.0, 5.0;
  Eigen::VectorXd q(1);
  q << 0.0;
  EXPECT_EQ(nearest_neighbors(pool, q, 3), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(nearest_neighbors(pool, q, 2, 0), (std::vector<int>{1, 2}));
}

TEST(Borderline, IsolatedPointIsNoise) {
  Eigen::MatrixXd minority(1, 1), majority(3, 1);
  minority << 0.0;
  majority << 1.0, 2.0, 3.0;
  const auto kinds = borderline_census(minority, majority, 3);
  ASSERT_EQ(kinds.size(), 1u);
  EXPECT_EQ(kinds[0], BorderlineKind::Noise);
}

TEST(Borderline, CensusKinds) {
  Eigen::MatrixXd minority(3, 1), majority(3, 1);
  minority << 0.0, 0.1, 5.0;
  majority << 5.05, 5.1, 20.0;
  // k = 2: point 0 sees two minority points, point 2 two majority points.
  // k = 3 adds a minority neighbor to point 2, making it a danger point.
  const auto kinds = borderline_census(minority, majority, 2);
  EXPECT_EQ(kinds[0], BorderlineKind::Safe);
  EXPECT_EQ(kinds[2], BorderlineKind::Noise);
  const auto k3 = borderline_census(minority, majority, 3);
  EXPECT_EQ(k3[2], BorderlineKind::Danger);
}

TEST(Borderline, DangerPointsAreTheOnlyBases) {
  const Eigen::MatrixXd minority = random_points(20, 3, 4);
  const Eigen::MatrixXd majority = random_points(40, 3, 5, 1.0);
  OversampleRequest r;
  r.minority = minority;
  r.n_synthetic = 120;
  const auto kinds = borderline_census(minority, majority, 5);
  const auto out = borderline_smote(r, majority);
  ASSERT_EQ(out.points.rows(), 120);
  const bool any_danger = std::count(kinds.begin(), kinds.end(), BorderlineKind::Danger) > 0;
  ASSERT_TRUE(any_danger);
  for (int b : out.base) EXPECT_EQ(kinds[b], BorderlineKind::Danger);
  const auto rep = oracle::check_segments(minority, out);
  EXPECT_LT(rep.worst_residual, 1e-9);
  EXPECT_TRUE(rep.inside_box);
}

TEST(Borderline, FarMajorityFallsBackToSmote) {
  OversampleRequest r;
  r.minority = random_points(10, 2, 6);
  r.n_synthetic = 30;
  const Eigen::MatrixXd majority = random_points(10, 2, 7, 1000.0);
  const auto out = borderline_smote(r, majority);
  EXPECT_EQ(out.points, smote(r).points);
}

TEST(Adasyn, HandComputedAllocation) {
  const std::vector<double> w{0.2, 0.8};
  EXPECT_EQ(adasyn_allocation(w, 10), (std::vector<int>{2, 8}));
}

TEST(Adasyn, AllocationConservesCount) {
  const std::vector<double> w{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const auto a = adasyn_allocation(w, 10);
  EXPECT_EQ(a[0] + a[1] + a[2], 10);
  const std::vector<double> v{0.05, 0.05, 0.05, 0.85};
  const auto b = adasyn_allocation(v, 7);
  EXPECT_EQ(b[0] + b[1] + b[2] + b[3], 7);
  EXPECT_GE(b[3], 6);
  const std::vector<double> u{0.5, 0.5};
  const auto c = adasyn_allocation(u, 3);
  EXPECT_EQ(c[0] + c[1], 3);
}

TEST(Adasyn, ChildrenFollowWeights) {
  Eigen::MatrixXd minority(4, 1), majority(3, 1);
  minority << 0.0, 0.2, 0.4, 3.0;
  majority << 3.1, 3.2, 3.3;
  OversampleRequest r;
  r.minority = minority;
  r.k = 3;
  r.n_synthetic = 40;
  const auto out = adasyn(r, majority);
  ASSERT_EQ(out.points.rows(), 40);
  std::vector<int> children(4, 0);
  for (int b : out.base) ++children[b];
  EXPECT_GT(children[3], children[0]);
  const auto rep = oracle::check_segments(minority, out);
  EXPECT_LT(rep.worst_residual, 1e-9);
  EXPECT_TRUE(rep.inside_box);
}

TEST(Adasyn, ZeroWeightsFallBackToSmote) {
  OversampleRequest r;
  r.minority = random_points(8, 2, 8);
  r.n_synthetic = 16;
  const auto out = adasyn(r, random_points(8, 2, 9, 500.0));
  EXPECT_EQ(out.points, smote(r).points);
}

TEST(OversampleDataset, TopsMinoritiesToMajorityInRange) {
  const Dataset d = testing_support::toy_dataset({30, 6, 4}, 4, 1, 10);
  ImbalanceSpec spec;
  spec.majority_class = 0;
  spec.minority_classes = {1, 2};
  for (auto method : {OversampleMethod::Smote, OversampleMethod::BorderlineSmote, OversampleMethod::Adasyn}) {
    const Dataset out = oversample_dataset(d, spec, method, 5, 3);
    EXPECT_EQ(out.class_counts(), (std::vector<int>{30, 30, 30})) << to_string(method);
    out.validate();
    std::int64_t max_id = 0;
    for (const auto& s : d.samples) max_id = std::max(max_id, s.id);
    for (std::size_t i = d.size(); i < out.size(); ++i) {
      EXPECT_GT(out.samples[i].id, max_id);
      EXPECT_EQ(out.samples[i].path, "synthetic/" + std::to_string(out.samples[i].id) + ".png");
    }
  }
  EXPECT_EQ(parse_oversample_method("b-smote"), OversampleMethod::BorderlineSmote);
  EXPECT_THROW(parse_oversample_method("smotenn"), Error);
}
