#include "tpgan/losses.hpp"

#include <atomic>

#include <spdlog/spdlog.h>

namespace tpgan {

namespace {

std::atomic<std::uint64_t> g_clamp_events{0};

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
  for (T v : t.values()) {
    if (!std::isfinite(static_cast<double>(v))) fail(Errc::NonFiniteLoss, std::string(what) + " is not finite");
  }
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(Errc::ShapeMismatch, std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

double clamped_neg_log(double p) {
  if (p < kLogFloor) {
    const auto events = ++g_clamp_events;
    spdlog::debug("log argument {} clamped to {} (event {})", p, kLogFloor, events);
    p = kLogFloor;
  }
  return -std::log(p);
}

std::uint64_t log_clamp_events() { return g_clamp_events.load(); }

OutputLink parse_output_link(std::string_view name) {
  if (name == "logit") return OutputLink::Identity;
  if (name == "probability") return OutputLink::Sigmoid;
  fail(Errc::InvalidArgument, "unknown penalty target '" + std::string(name) + "' (logit or probability)");
}

std::string to_string(OutputLink link) { return link == OutputLink::Identity ? "logit" : "probability"; }

std::vector<int> sample_mislabels(std::span<const int> labels, int num_classes, Rng& rng) {
  if (num_classes < 2) fail(Errc::DegenerateLabelSpace, "mislabeling needs at least two classes");
  std::vector<int> out;
  out.reserve(labels.size());
  for (int y : labels) {
    const int r = static_cast<int>(rng.index(static_cast<std::size_t>(num_classes - 1)));
    out.push_back(r < y ? r : r + 1);
  }
  return out;
}

template <typename T>
DiscriminatorLossTerms<T> discriminator_loss_on(nn::Discriminator<T>& d, const Tensor<T>& x_real,
                                                std::span<const int> y_real, const Tensor<T>& x_gen,
                                                std::span<const int> y_gen, std::span<const int> y_mislabel,
                                                const DiscriminatorLossOptions& options, Rng& rng, bool accumulate) {
  if (options.lambda < 0.0) fail(Errc::InvalidArgument, "gradient penalty coefficient must be non-negative");
  const int n_real = x_real.n(), n_gen = x_gen.n();
  require_same_size(y_real.size(), static_cast<std::size_t>(n_real), "actual labels");
  require_same_size(y_gen.size(), static_cast<std::size_t>(n_gen), "generated labels");
  if (options.mislabel_term) require_same_size(y_mislabel.size(), y_real.size(), "mislabels");
  if (options.gradient_penalty) require_same_size(n_real, n_gen, "penalty pairs actual with generated rows");

  Tensor<T> batch = concat_batch(d.condition(x_real, y_real), d.condition(x_gen, y_gen));
  const int n_mis = options.mislabel_term ? n_real : 0;
  if (options.mislabel_term) batch = concat_batch(batch, d.condition(x_real, y_mislabel));

  const Tensor<T> logits = d.logits(batch, nn::Pass{nn::Phase::Train, false});
  require_finite(logits, "discriminator output");
  Tensor<T> d_logits = logits;
  DiscriminatorLossTerms<T> terms;
  for (int i = 0; i < logits.n(); ++i) {
    const T p = nn::sigmoid(logits[i]);
    if (i < n_real) {
      terms.actual += clamped_neg_log(static_cast<double>(p)) / n_real;
      d_logits[i] = (p - T(1)) / static_cast<T>(n_real);
    } else if (i < n_real + n_gen) {
      terms.generated += clamped_neg_log(1.0 - static_cast<double>(p)) / n_gen;
      d_logits[i] = p / static_cast<T>(n_gen);
    } else {
      terms.mislabeled += clamped_neg_log(1.0 - static_cast<double>(p)) / n_mis;
      d_logits[i] = p / static_cast<T>(n_mis);
    }
  }
  if (accumulate) d.backward(d_logits, nn::BackwardOptions{false, true});

  if (options.gradient_penalty) {
    auto pen = gradient_penalty<T>(d, x_real, x_gen, y_real, rng, options.lambda, accumulate, options.penalty_link);
    terms.penalty = pen.value;
    terms.alphas = std::move(pen.alphas);
  }
  terms.total = terms.actual + terms.generated + terms.mislabeled +
                (options.gradient_penalty ? options.lambda * terms.penalty : 0.0);
  if (!std::isfinite(terms.total)) fail(Errc::NonFiniteLoss, "discriminator loss is not finite");
  return terms;
}

template <typename T>
DiscriminatorLossTerms<T> discriminator_loss(nn::Discriminator<T>& d, nn::Generator<T>& g, const Tensor<T>& x_real,
                                             std::span<const int> y_real, const Tensor<T>& z,
                                             std::span<const int> y_gen, std::span<const int> y_mislabel,
                                             const DiscriminatorLossOptions& options, Rng& rng, bool accumulate,
                                             nn::Phase generator_phase) {
  const Tensor<T> x_gen = g.forward(z, y_gen, generator_phase);
  return discriminator_loss_on(d, x_real, y_real, x_gen, y_gen, y_mislabel, options, rng, accumulate);
}

template <typename T>
GeneratorLossTerms generator_loss(nn::Generator<T>& g, nn::Discriminator<T>& d, nn::Classifier<T>& c,
                                  const Tensor<T>& z, std::span<const int> y_gen, const GeneratorLossOptions& options,
                                  bool accumulate) {
  const int n = z.n();
  if (n == 0) fail(Errc::InvalidArgument, "generator loss needs a non-empty noise batch");
  const Tensor<T> x_gen = g.forward(z, y_gen, nn::Phase::Train);

  GeneratorLossTerms terms;
  const Tensor<T> logits = d.logits(d.condition(x_gen, y_gen), nn::Pass{nn::Phase::Train, false});
  require_finite(logits, "discriminator output");
  Tensor<T> d_logits = logits;
  for (int i = 0; i < n; ++i) {
    const T p = nn::sigmoid(logits[i]);
    terms.adversarial += clamped_neg_log(static_cast<double>(p)) / n;
    d_logits[i] = (p - T(1)) / static_cast<T>(n);
  }
  Tensor<T> d_image;
  if (accumulate) {
    d_image = leading_channels(d.backward(d_logits, nn::BackwardOptions{true, false}), g.profile().channels);
  }

  if (options.classifier_term) {
    const auto out = c.forward(x_gen, nn::Phase::Train);
    require_finite(out.logits, "classifier output");
    Tensor<T> probs = nn::softmax(out.logits);
    const int k = static_cast<int>(probs.row_size());
    for (int i = 0; i < n; ++i) {
      terms.classification += clamped_neg_log(static_cast<double>(probs[i * k + y_gen[i]])) / n;
      for (int j = 0; j < k; ++j) probs[i * k + j] = (probs[i * k + j] - (j == y_gen[i] ? T(1) : T(0))) / static_cast<T>(n);
    }
    if (accumulate) {
      const Tensor<T> d_from_c = c.backward(probs, nn::BackwardOptions{true, false});
      for (std::size_t i = 0; i < d_image.size(); ++i) d_image[i] += d_from_c[i];
    }
  }
  if (accumulate) g.backward(d_image, nn::BackwardOptions{false, true});
  terms.total = terms.adversarial + terms.classification;
  if (!std::isfinite(terms.total)) fail(Errc::NonFiniteLoss, "generator loss is not finite");
  return terms;
}

template <typename T>
ClassifierLossTerms classifier_loss(nn::Classifier<T>& c, const Tensor<T>& x_real, std::span<const int> y_real,
                                    const Tensor<T>& x_gen, std::span<const int> y_gen, bool accumulate) {
  const int n_real = x_real.n(), n_gen = x_gen.n();
  if (n_real == 0 && n_gen == 0) fail(Errc::InvalidArgument, "classifier loss needs at least one sample");
  require_same_size(y_real.size(), static_cast<std::size_t>(n_real), "actual labels");
  require_same_size(y_gen.size(), static_cast<std::size_t>(n_gen), "generated labels");

  const auto out = c.forward(concat_batch(x_real, x_gen), nn::Phase::Train);
  require_finite(out.logits, "classifier output");
  Tensor<T> probs = nn::softmax(out.logits);
  const int k = static_cast<int>(probs.row_size());
  ClassifierLossTerms terms;
  for (int i = 0; i < n_real + n_gen; ++i) {
    const bool actual = i < n_real;
    const int y = actual ? y_real[i] : y_gen[i - n_real];
    const int count = actual ? n_real : n_gen;
    const double ce = clamped_neg_log(static_cast<double>(probs[i * k + y])) / count;
    (actual ? terms.actual : terms.generated) += ce;
    for (int j = 0; j < k; ++j) {
      probs[i * k + j] = (probs[i * k + j] - (j == y ? T(1) : T(0))) / static_cast<T>(count);
    }
  }
  if (accumulate) c.backward(probs, nn::BackwardOptions{false, true});
  terms.total = terms.actual + terms.generated;
  if (!std::isfinite(terms.total)) fail(Errc::NonFiniteLoss, "classifier loss is not finite");
  return terms;
}

#define TPGAN_INSTANTIATE(T)                                                                                       \
  template DiscriminatorLossTerms<T> discriminator_loss_on<T>(                                                     \
      nn::Discriminator<T>&, const Tensor<T>&, std::span<const int>, const Tensor<T>&, std::span<const int>,        \
      std::span<const int>, const DiscriminatorLossOptions&, Rng&, bool);                                          \
  template DiscriminatorLossTerms<T> discriminator_loss<T>(                                                        \
      nn::Discriminator<T>&, nn::Generator<T>&, const Tensor<T>&, std::span<const int>, const Tensor<T>&,          \
      std::span<const int>, std::span<const int>, const DiscriminatorLossOptions&, Rng&, bool, nn::Phase);         \
  template GeneratorLossTerms generator_loss<T>(nn::Generator<T>&, nn::Discriminator<T>&, nn::Classifier<T>&,     \
                                                const Tensor<T>&, std::span<const int>,                            \
                                                const GeneratorLossOptions&, bool);                                \
  template ClassifierLossTerms classifier_loss<T>(nn::Classifier<T>&, const Tensor<T>&, std::span<const int>,      \
                                                  const Tensor<T>&, std::span<const int>, bool);

TPGAN_INSTANTIATE(float)
TPGAN_INSTANTIATE(double)
#undef TPGAN_INSTANTIATE

}  // namespace tpgan
