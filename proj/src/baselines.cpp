#include "tpgan/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "tpgan/rng.hpp"

namespace tpgan {

namespace {

int clamp_k(int k, Eigen::Index n) {
  if (k < 1) fail(Errc::InvalidArgument, "neighbor count must be at least 1");
  if (k > n - 1) {
    spdlog::debug("k={} reduced to {} for {} points", k, n - 1, n);
    return static_cast<int>(n - 1);
  }
  return k;
}

void check_request(const OversampleRequest& r) {
  if (r.minority.rows() < 2) fail(Errc::TooFewPoints, "oversampling needs at least two minority points");
  if (r.n_synthetic < 0) fail(Errc::InvalidArgument, "n_synthetic must be non-negative");
  if (r.fixed_gap && !(*r.fixed_gap >= 0.0 && *r.fixed_gap <= 1.0)) fail(Errc::InvalidArgument, "gap must lie in [0, 1]");
}

/// Appends one child of `base` with a uniformly chosen partner from `partners`.
void emit_child(const OversampleRequest& r, int base, const std::vector<int>& partners, Rng& rng,
                OversampleResult& out, Eigen::Index row) {
  const int partner = partners[rng.index(partners.size())];
  const double gap = r.fixed_gap ? *r.fixed_gap : rng.uniform();
  out.points.row(row) = r.minority.row(base) + gap * (r.minority.row(partner) - r.minority.row(base));
  out.base.push_back(base);
  out.partner.push_back(partner);
  out.gap.push_back(gap);
}

OversampleResult empty_result(const OversampleRequest& r) {
  OversampleResult out;
  out.points.resize(r.n_synthetic, r.minority.cols());
  return out;
}

/// Synthesises from the given base cycle; each pass over `bases` is shuffled.
OversampleResult interpolate_from(const OversampleRequest& r, std::vector<int> bases, Rng& rng) {
  const int k = clamp_k(r.k, r.minority.rows());
  std::vector<std::vector<int>> neighbors(r.minority.rows());
  OversampleResult out = empty_result(r);
  for (int s = 0; s < r.n_synthetic; ++s) {
    if (s % static_cast<int>(bases.size()) == 0) rng.shuffle(bases.begin(), bases.end());
    const int b = bases[s % bases.size()];
    if (neighbors[b].empty()) neighbors[b] = nearest_neighbors(r.minority, r.minority.row(b).transpose(), k, b);
    emit_child(r, b, neighbors[b], rng, out, s);
  }
  return out;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (b.rows() > 0 && a.cols() != b.cols()) fail(Errc::ShapeMismatch, "minority and majority dimensions differ");
  Eigen::MatrixXd all(a.rows() + b.rows(), a.cols());
  all << a, b;
  return all;
}

/// Majority members among each minority point's k nearest neighbors in the
/// combined set.
std::vector<int> majority_neighbor_counts(const Eigen::MatrixXd& minority, const Eigen::MatrixXd& majority, int k) {
  if (majority.rows() < 1) fail(Errc::TooFewPoints, "the majority class is empty");
  const Eigen::MatrixXd all = stack(minority, majority);
  const int kk = clamp_k(k, all.rows());
  std::vector<int> counts(minority.rows());
  for (Eigen::Index i = 0; i < minority.rows(); ++i) {
    int c = 0;
    for (int j : nearest_neighbors(all, minority.row(i).transpose(), kk, static_cast<int>(i))) c += j >= minority.rows();
    counts[i] = c;
  }
  return counts;
}

}  // namespace

std::vector<int> nearest_neighbors(const Eigen::MatrixXd& pool, const Eigen::VectorXd& query, int k, int exclude) {
  std::vector<std::pair<double, int>> d;
  d.reserve(pool.rows());
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    if (i == exclude) continue;
    d.emplace_back((pool.row(i).transpose() - query).squaredNorm(), static_cast<int>(i));
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), d.size());
  std::partial_sort(d.begin(), d.begin() + take, d.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(d[i].second);
  return out;
}

OversampleResult smote(const OversampleRequest& r) {
  check_request(r);
  Rng rng(r.seed);
  std::vector<int> bases(r.minority.rows());
  std::iota(bases.begin(), bases.end(), 0);
  return interpolate_from(r, std::move(bases), rng);
}

std::vector<BorderlineKind> borderline_census(const Eigen::MatrixXd& minority, const Eigen::MatrixXd& majority, int k) {
  const int kk = clamp_k(k, minority.rows() + majority.rows());
  std::vector<BorderlineKind> kinds;
  for (int m : majority_neighbor_counts(minority, majority, kk)) {
    if (m == kk) {
      kinds.push_back(BorderlineKind::Noise);
    } else if (2 * m >= kk) {
      kinds.push_back(BorderlineKind::Danger);
    } else {
      kinds.push_back(BorderlineKind::Safe);
    }
  }
  return kinds;
}

OversampleResult borderline_smote(const OversampleRequest& r, const Eigen::MatrixXd& majority) {
  check_request(r);
  const auto kinds = borderline_census(r.minority, majority, r.k);
  std::vector<int> danger;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (kinds[i] == BorderlineKind::Danger) danger.push_back(static_cast<int>(i));
  }
  if (danger.empty()) {
    spdlog::info("borderline-smote: no danger points, falling back to smote");
    return smote(r);
  }
  Rng rng(r.seed);
  return interpolate_from(r, std::move(danger), rng);
}

std::vector<int> adasyn_allocation(std::span<const double> weights, int n_synthetic) {
  std::vector<int> out(weights.size(), 0);
  if (weights.empty()) return out;
  int total = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += out[i] = static_cast<int>(std::lround(weights[i] * n_synthetic));
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  for (std::size_t i = 0; total < n_synthetic; i = (i + 1) % order.size(), ++total) ++out[order[i]];
  for (std::size_t i = order.size(); total > n_synthetic;) {
    i = (i == 0 ? order.size() : i) - 1;
    if (out[order[i]] > 0) --out[order[i]], --total;
  }
  return out;
}

OversampleResult adasyn(const OversampleRequest& r, const Eigen::MatrixXd& majority) {
  check_request(r);
  const int kk = clamp_k(r.k, r.minority.rows() + majority.rows());
  const auto counts = majority_neighbor_counts(r.minority, majority, kk);
  const double sum = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (sum == 0.0) {
    spdlog::info("adasyn: all weights are zero, falling back to smote");
    return smote(r);
  }
  std::vector<double> weights;
  for (int c : counts) weights.push_back(c / sum);
  const auto alloc = adasyn_allocation(weights, r.n_synthetic);

  Rng rng(r.seed);
  const int k = clamp_k(r.k, r.minority.rows());
  OversampleResult out = empty_result(r);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (alloc[i] == 0) continue;
    const auto partners = nearest_neighbors(r.minority, r.minority.row(i).transpose(), k, static_cast<int>(i));
    for (int c = 0; c < alloc[i]; ++c) emit_child(r, static_cast<int>(i), partners, rng, out, row++);
  }
  return out;
}

OversampleMethod parse_oversample_method(std::string_view name) {
  if (name == "smote") return OversampleMethod::Smote;
  if (name == "b-smote") return OversampleMethod::BorderlineSmote;
  if (name == "adasyn") return OversampleMethod::Adasyn;
  fail(Errc::Config, "unknown oversampling method '" + std::string(name) + "'");
}

std::string_view to_string(OversampleMethod method) {
  switch (method) {
    case OversampleMethod::Smote: return "smote";
    case OversampleMethod::BorderlineSmote: return "b-smote";
    case OversampleMethod::Adasyn: return "adasyn";
  }
  return "?";
}

Dataset oversample_dataset(const Dataset& train, const ImbalanceSpec& spec, OversampleMethod method, int k,
                           std::uint64_t seed) {
  const int majority = train.class_index(spec.majority_class);
  const auto counts = train.class_counts();
  const std::size_t dim = static_cast<std::size_t>(train.height) * train.width * train.channels;
  auto rows_of = [&](auto pred) {
    std::vector<const Sample*> picked;
    for (const auto& s : train.samples) {
      if (pred(s.label)) picked.push_back(&s);
    }
    Eigen::MatrixXd m(picked.size(), dim);
    for (std::size_t i = 0; i < picked.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) m(i, j) = picked[i]->image[j];
    }
    return m;
  };

  Dataset out = train;
  std::int64_t next_id = 0;
  for (const auto& s : train.samples) next_id = std::max(next_id, s.id + 1);
  for (int c : spec.minority_classes) {
    const int label = train.class_index(c);
    OversampleRequest req;
    req.minority = rows_of([&](int y) { return y == label; });
    req.k = k;
    req.n_synthetic = counts[majority] - counts[label];
    req.seed = derive_seed(seed, static_cast<std::uint64_t>(label));
    if (req.n_synthetic <= 0) continue;
    const Eigen::MatrixXd others = rows_of([&](int y) { return y != label; });
    OversampleResult res;
    switch (method) {
      case OversampleMethod::Smote: res = smote(req); break;
      case OversampleMethod::BorderlineSmote: res = borderline_smote(req, others); break;
      case OversampleMethod::Adasyn: res = adasyn(req, others); break;
    }
    for (Eigen::Index i = 0; i < res.points.rows(); ++i) {
      Sample s;
      s.image.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) s.image[j] = static_cast<float>(std::clamp(res.points(i, j), -1.0, 1.0));
      s.label = label;
      s.id = next_id++;
      s.path = "synthetic/" + std::to_string(s.id) + ".png";
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace tpgan
