#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpgan/nn/networks.hpp"

namespace tpgan {

/// Arguments of every log in the objectives are clamped to this floor.
inline constexpr double kLogFloor = 1e-12;

/// -log(max(p, kLogFloor)); a clamp is counted and logged at debug level.
double clamped_neg_log(double p);
/// Total number of clamp events since process start.
std::uint64_t log_clamp_events();

/// Draws, per row, a label uniformly from the num_classes - 1 wrong labels.
std::vector<int> sample_mislabels(std::span<const int> labels, int num_classes, Rng& rng);

/// Which output the penalty differentiates: the probability (sigmoid of the
/// logit) or the raw score. The probability's slope is at most 1/4, so a unit
/// target on it forces logit slopes of at least 4.
enum class OutputLink { Sigmoid, Identity };

OutputLink parse_output_link(std::string_view name);
std::string to_string(OutputLink link);

/// Anything with a logit forward that understands dual passes and a backward.
template <typename C, typename T>
concept Critic = requires(C c, const Tensor<T>& x, nn::Pass pass, nn::BackwardOptions opts) {
  { c.logits(x, pass) } -> std::same_as<Tensor<T>>;
  { c.backward(x, opts) } -> std::same_as<Tensor<T>>;
};

template <typename T>
struct PenaltyResult {
  double value = 0.0;
  std::vector<T> alphas;
  std::vector<double> gradient_norms;
};

/// Mean over rows of (||grad_{input} D(input)|| - 1)^2, where input is the
/// conditioned interpolate x_hat = a x_real + (1 - a) x_gen with its label
/// channels. With accumulate, adds
/// weight * d(penalty)/d(theta_D) to the critic's parameter gradients via a
/// forward-over-reverse dual pass.
template <typename T, Critic<T> C>
PenaltyResult<T> gradient_penalty_conditioned(C& critic, const Tensor<T>& conditioned_interpolates,
                                              std::vector<T> alphas, double weight, bool accumulate,
                                              OutputLink link = OutputLink::Identity) {
  const int n = conditioned_interpolates.n();
  PenaltyResult<T> result;
  result.alphas = std::move(alphas);
  if (n == 0) return result;

  const Tensor<T> logits = critic.logits(conditioned_interpolates, nn::Pass{nn::Phase::Train, false});
  Tensor<T> d_logits = logits;
  for (int i = 0; i < n; ++i) {
    if (link == OutputLink::Sigmoid) {
      const T s = nn::sigmoid(logits[i]);
      d_logits[i] = s * (T(1) - s);
    } else {
      d_logits[i] = T(1);
    }
  }
  const Tensor<T> input_grad = critic.backward(d_logits, nn::BackwardOptions{true, false});

  std::vector<T> coef(n, T(0));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (T g : input_grad.row(i)) {
      if (!std::isfinite(static_cast<double>(g))) fail(Errc::NonFiniteGradient, "critic input gradient is not finite");
      sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    result.gradient_norms.push_back(norm);
    total += (norm - 1.0) * (norm - 1.0);
    if (norm > 0.0) coef[i] = static_cast<T>(weight * 2.0 * (norm - 1.0) / (static_cast<double>(n) * norm));
  }
  result.value = total / n;
  if (!accumulate || weight == 0.0) return result;

  // d/dtheta sum_i coef_i g_i . g_i(theta) is the gradient of the directional
  // derivative of D along v_i = coef_i g_i, held fixed.
  Tensor<T> tangent = input_grad;
  for (int i = 0; i < n; ++i)
    for (auto& v : tangent.row(i)) v *= coef[i];
  const Tensor<T> dual_logits =
      critic.logits(concat_batch(conditioned_interpolates, tangent), nn::Pass{nn::Phase::Train, true});
  Tensor<T> d_dual = dual_logits;
  for (int i = 0; i < n; ++i) {
    const T a_dot = dual_logits[n + i];
    if (link == OutputLink::Sigmoid) {
      const T s = nn::sigmoid(dual_logits[i]);
      d_dual[i] = a_dot * s * (T(1) - s) * (T(1) - T(2) * s);
      d_dual[n + i] = s * (T(1) - s);
    } else {
      d_dual[i] = T(0);
      d_dual[n + i] = T(1);
    }
  }
  critic.backward(d_dual, nn::BackwardOptions{false, true});
  return result;
}

/// Convex combinations a_i x_real_i + (1 - a_i) x_gen_i, index-aligned.
template <typename T>
Tensor<T> interpolate(const Tensor<T>& x_real, const Tensor<T>& x_gen, std::span<const T> alphas) {
  if (!x_real.same_shape(x_gen)) {
    fail(Errc::ShapeMismatch, "interpolate " + x_real.shape_string() + " vs " + x_gen.shape_string());
  }
  Tensor<T> out = x_real;
  for (int i = 0; i < x_real.n(); ++i) {
    auto o = out.row(i);
    auto g = x_gen.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = alphas[i] * o[j] + (T(1) - alphas[i]) * g[j];
  }
  return out;
}

/// Gradient penalty on the discriminator with alphas drawn from rng.
template <typename T>
PenaltyResult<T> gradient_penalty(nn::Discriminator<T>& d, const Tensor<T>& x_real, const Tensor<T>& x_gen,
                                  std::span<const int> labels, Rng& rng, double weight = 1.0,
                                  bool accumulate = false, OutputLink link = OutputLink::Identity) {
  std::vector<T> alphas(x_real.n());
  for (auto& a : alphas) a = static_cast<T>(rng.uniform());
  const Tensor<T> conditioned = d.condition(interpolate<T>(x_real, x_gen, alphas), labels);
  return gradient_penalty_conditioned<T>(d, conditioned, std::move(alphas), weight, accumulate, link);
}

struct DiscriminatorLossOptions {
  double lambda = 10.0;
  bool mislabel_term = true;
  bool gradient_penalty = true;
  OutputLink penalty_link = OutputLink::Identity;
};

template <typename T>
struct DiscriminatorLossTerms {
  double actual = 0.0;      ///< -E log D(x_a, y_a)
  double generated = 0.0;   ///< -E log(1 - D(G(z, y_g), y_g))
  double mislabeled = 0.0;  ///< -E log(1 - D(x_a, y_m))
  double penalty = 0.0;     ///< unweighted gradient penalty
  double total = 0.0;
  std::vector<T> alphas;
};

/// Discriminator objective. The generator is evaluated in `generator_phase`
/// and treated as a constant. With accumulate, adds d(total)/d(theta_D) to the
/// discriminator's gradients.
template <typename T>
DiscriminatorLossTerms<T> discriminator_loss(nn::Discriminator<T>& d, nn::Generator<T>& g, const Tensor<T>& x_real,
                                             std::span<const int> y_real, const Tensor<T>& z,
                                             std::span<const int> y_gen, std::span<const int> y_mislabel,
                                             const DiscriminatorLossOptions& options, Rng& rng, bool accumulate,
                                             nn::Phase generator_phase = nn::Phase::Train);

/// Same objective on already-generated images (no generator involved).
template <typename T>
DiscriminatorLossTerms<T> discriminator_loss_on(nn::Discriminator<T>& d, const Tensor<T>& x_real,
                                                std::span<const int> y_real, const Tensor<T>& x_gen,
                                                std::span<const int> y_gen, std::span<const int> y_mislabel,
                                                const DiscriminatorLossOptions& options, Rng& rng, bool accumulate);

struct GeneratorLossOptions {
  bool classifier_term = true;
};

struct GeneratorLossTerms {
  double adversarial = 0.0;     ///< -E log D(G(z, y_g), y_g)
  double classification = 0.0;  ///< -E y_g . log C(G(z, y_g))
  double total = 0.0;
};

/// Non-saturating generator objective plus the cooperative classification
/// term. With accumulate, only the generator's gradients change.
template <typename T>
GeneratorLossTerms generator_loss(nn::Generator<T>& g, nn::Discriminator<T>& d, nn::Classifier<T>& c,
                                  const Tensor<T>& z, std::span<const int> y_gen, const GeneratorLossOptions& options,
                                  bool accumulate);

struct ClassifierLossTerms {
  double actual = 0.0;     ///< -E y_a . log C(x_a)
  double generated = 0.0;  ///< -E y_g . log C(x_g)
  double total = 0.0;
};

/// Cross-entropy on actual and generated sub-batches, each averaged over its
/// own rows. Generated images are plain inputs, so no gradient reaches G.
template <typename T>
ClassifierLossTerms classifier_loss(nn::Classifier<T>& c, const Tensor<T>& x_real, std::span<const int> y_real,
                                    const Tensor<T>& x_gen, std::span<const int> y_gen, bool accumulate);

}  // namespace tpgan
