#pragma once

// Random small configurations on which the library objectives are compared
// with the scalar oracle. Returns the largest absolute deviation over every
// reported term.

#include <algorithm>
#include <cmath>

#include "oracle/reference.hpp"
#include "tpgan/losses.hpp"

namespace oracle {

struct LossDeviation {
  double discriminator = 0.0;
  double generator = 0.0;
  double classifier = 0.0;
  double worst() const { return std::max({discriminator, generator, classifier}); }
};

inline tpgan::nn::Profile case_profile(tpgan::Rng& rng) {
  tpgan::nn::Profile p;
  p.name = "oracle";
  p.image_size = 16;
  p.channels = rng.uniform() < 0.5 ? 1 : 3;
  p.num_classes = 2 + static_cast<int>(rng.index(3));
  p.noise_dim = 3 + static_cast<int>(rng.index(6));
  p.discriminator_kernels = {2 + static_cast<int>(rng.index(3)), 3, 4, 2 + static_cast<int>(rng.index(4))};
  p.generator_kernels = {3, 2 + static_cast<int>(rng.index(3)), 3};
  p.classifier_kernels = {3, 3, 2 + static_cast<int>(rng.index(3)), 4};
  p.generator_seed_channels = 3 + static_cast<int>(rng.index(3));
  return p;
}

inline void amplify(const std::vector<tpgan::nn::Param<double>*>& params, double factor) {
  for (auto* p : params)
    for (auto& v : p->value) v *= factor;
}

/// One random configuration: fresh networks, batch size 2..6, random lambda.
inline LossDeviation compare_losses_once(std::uint64_t seed) {
  using namespace tpgan;
  Rng rng(seed);
  const nn::Profile p = case_profile(rng);
  nn::Generator<double> g(p, rng);
  nn::Discriminator<double> d(p, rng);
  nn::Classifier<double> c(p, rng);
  // Larger weights than the 0.02 initialisation so sigmoid and softmax are
  // away from their trivial values.
  amplify(g.params(), 20.0);
  amplify(d.params(), 12.0 + 10.0 * rng.uniform());
  amplify(c.params(), 12.0 + 10.0 * rng.uniform());

  const int n = 2 + static_cast<int>(rng.index(5));
  const int k = p.num_classes;
  Tensor<double> x_real(n, 16, 16, p.channels);
  for (auto& v : x_real.values()) v = 2.0 * rng.uniform() - 1.0;
  Tensor<double> z = Tensor<double>::matrix(n, p.noise_dim);
  for (auto& v : z.values()) v = rng.normal();
  std::vector<int> y_real(n), y_gen(n);
  for (auto& v : y_real) v = static_cast<int>(rng.index(k));
  for (auto& v : y_gen) v = static_cast<int>(rng.index(k));
  const std::vector<int> y_mis = sample_mislabels(y_real, k, rng);
  const double lambda = 20.0 * rng.uniform();
  const bool stabilizers = rng.uniform() < 0.75;
  const bool on_probability = rng.uniform() < 0.5;

  LossDeviation dev;
  const Weights wd = weights_of(d.params());
  const Weights wg = weights_of(g.params());
  const Weights wc = weights_of(c.params());
  const Img img_real = img_of(x_real);
  const Img img_gen = generator_train(wg, p, img_of(z), y_gen, nn::BatchNorm<double>::kEpsilon);

  // Discriminator objective.
  {
    Rng draw(seed ^ 0x5eed);
    const auto terms = discriminator_loss<double>(d, g, x_real, y_real, z, y_gen, y_mis,
                                                  DiscriminatorLossOptions{lambda, stabilizers, stabilizers,
                                                                           on_probability ? OutputLink::Sigmoid : OutputLink::Identity},
                                                  draw,
                                                  false, nn::Phase::Train);
    std::vector<double> alphas(terms.alphas.begin(), terms.alphas.end());
    const auto want = discriminator_terms(wd, p, img_real, y_real, img_gen, y_gen, y_mis, alphas, lambda, stabilizers,
                                          stabilizers, on_probability);
    dev.discriminator = std::max({std::abs(terms.actual - want.actual), std::abs(terms.generated - want.generated),
                                  std::abs(terms.mislabeled - want.mislabeled), std::abs(terms.penalty - want.penalty),
                                  std::abs(terms.total - want.total)});
  }

  // Generator objective.
  {
    const bool with_c = rng.uniform() < 0.75;
    const auto terms = generator_loss<double>(g, d, c, z, y_gen, GeneratorLossOptions{with_c}, false);
    double adversarial = 0.0, classification = 0.0;
    const auto logits = discriminator_logits(wd, p, img_gen, y_gen);
    for (double a : logits) adversarial += neg_log(sigmoid(a)) / n;
    if (with_c) {
      const auto probs = classifier_probs(wc, p, img_gen);
      for (int i = 0; i < n; ++i) classification += neg_log(probs[i][y_gen[i]]) / n;
    }
    dev.generator = std::max({std::abs(terms.adversarial - adversarial),
                              std::abs(terms.classification - classification),
                              std::abs(terms.total - (adversarial + classification))});
  }

  // Classifier objective, sometimes with an empty generated half.
  {
    const int n_gen = static_cast<int>(rng.index(static_cast<std::size_t>(n) + 1));
    Tensor<double> x_gen(n_gen, 16, 16, p.channels);
    for (auto& v : x_gen.values()) v = 2.0 * rng.uniform() - 1.0;
    std::vector<int> yg(n_gen);
    for (auto& v : yg) v = static_cast<int>(rng.index(k));
    const auto terms = classifier_loss<double>(c, x_real, y_real, x_gen, yg, false);
    double actual = 0.0, generated = 0.0;
    const auto pa = classifier_probs(wc, p, img_real);
    for (int i = 0; i < n; ++i) actual += neg_log(pa[i][y_real[i]]) / n;
    if (n_gen > 0) {
      const auto pg = classifier_probs(wc, p, img_of(x_gen));
      for (int i = 0; i < n_gen; ++i) generated += neg_log(pg[i][yg[i]]) / n_gen;
    }
    dev.classifier = std::max({std::abs(terms.actual - actual), std::abs(terms.generated - generated),
                               std::abs(terms.total - (actual + generated))});
  }
  return dev;
}

}  // namespace oracle
