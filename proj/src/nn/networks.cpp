#include "tpgan/nn/networks.hpp"

#include <cmath>

namespace tpgan::nn {

Profile Profile::full(int channels, int num_classes) {
  Profile p;
  p.name = "full";
  p.channels = channels;
  p.num_classes = num_classes;
  return p;
}

Profile Profile::desk(int channels, int num_classes) {
  Profile p;
  p.name = "desk";
  p.image_size = 32;
  p.channels = channels;
  p.num_classes = num_classes;
  p.discriminator_kernels = {32, 64, 64, 128};
  p.generator_kernels = {64, 64, 32};
  p.classifier_kernels = {16, 16, 64, 128};
  p.generator_seed_channels = 128;
  return p;
}

Profile Profile::by_name(const std::string& name, int channels, int num_classes) {
  if (name == "full") return full(channels, num_classes);
  if (name == "desk") return desk(channels, num_classes);
  fail(Errc::Config, "unknown architecture profile '" + name + "' (expected full or desk)");
}

int Profile::seed_size() const { return image_size / 16; }

int Profile::trunk_size() const {
  int s = image_size;
  for (int i = 0; i < 4; ++i) s = (s + stride - 1) / stride;
  return s;
}

int Profile::classifier_feature_dim() const { return trunk_size() * trunk_size() * classifier_kernels[3]; }

void Profile::validate() const {
  if (image_size < 16 || image_size % 16 != 0) {
    fail(Errc::Config, "image_size must be a positive multiple of 16, got " + std::to_string(image_size));
  }
  if (channels < 1 || num_classes < 1 || noise_dim < 1) fail(Errc::Config, "profile dimensions must be positive");
  if (kernel_size < 1 || stride != 2) fail(Errc::Config, "profile requires stride 2 and a positive kernel size");
}

namespace {

template <typename T>
void add_conv_trunk(Sequential<T>& net, const Profile& p, int in_channels, const std::array<int, 4>& kernels,
                    Rng& rng) {
  int prev = in_channels;
  for (int i = 0; i < 4; ++i) {
    const std::string block = "block" + std::to_string(i + 1);
    net.template add<Conv2d<T>>(block + ".conv", prev, kernels[i], p.kernel_size, p.stride, p.init_stddev, rng);
    net.template add<LeakyRelu<T>>(block + ".act", p.leaky_slope);
    prev = kernels[i];
  }
  const int t = p.trunk_size();
  net.template add<Reshape<T>>("flatten", 1, 1, t * t * prev);
}

template <typename T>
Tensor<T> concat_features(const Tensor<T>& z, std::span<const int> labels, int num_classes) {
  if (static_cast<int>(labels.size()) != z.n()) fail(Errc::ShapeMismatch, "noise rows and label count differ");
  const Tensor<T> y = one_hot<T>(labels, num_classes);
  const int d = static_cast<int>(z.row_size());
  Tensor<T> out = Tensor<T>::matrix(z.n(), d + num_classes);
  for (int i = 0; i < z.n(); ++i) {
    std::copy(z.row(i).begin(), z.row(i).end(), out.row(i).begin());
    std::copy(y.row(i).begin(), y.row(i).end(), out.row(i).begin() + d);
  }
  return out;
}

}  // namespace

template <typename T>
T sigmoid(T logit) {
  if (logit >= T(0)) return T(1) / (T(1) + std::exp(-logit));
  const T e = std::exp(logit);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  Tensor<T> p = logits;
  const int k = static_cast<int>(logits.row_size());
  for (int i = 0; i < logits.n(); ++i) {
    auto row = p.row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum = T(0);
    for (auto& v : row) sum += (v = std::exp(v - mx));
    for (int j = 0; j < k; ++j) row[j] /= sum;
  }
  return p;
}

// ---------------------------------------------------------------- Generator

template <typename T>
Generator<T>::Generator(const Profile& profile, Rng& rng) : profile_(profile) {
  profile_.validate();
  const auto& p = profile_;
  const int s0 = p.seed_size();
  body_.template add<Dense<T>>("project", p.noise_dim + p.num_classes, s0 * s0 * p.generator_seed_channels,
                               p.init_stddev, rng);
  body_.template add<LeakyRelu<T>>("project.act", p.leaky_slope);
  body_.template add<Reshape<T>>("seed", s0, s0, p.generator_seed_channels);
  int prev = p.generator_seed_channels;
  for (int i = 0; i < 3; ++i) {
    const std::string block = "block" + std::to_string(i + 1);
    body_.template add<ConvTranspose2d<T>>(block + ".deconv", prev, p.generator_kernels[i], p.kernel_size, p.stride,
                                           p.init_stddev, rng);
    body_.template add<LeakyRelu<T>>(block + ".act", p.leaky_slope);
    body_.template add<BatchNorm<T>>(block + ".bn", p.generator_kernels[i]);
    prev = p.generator_kernels[i];
  }
  body_.template add<ConvTranspose2d<T>>("block4.deconv", prev, p.channels, p.kernel_size, p.stride, p.init_stddev,
                                         rng);
  body_.template add<Tanh<T>>("output");
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& z, std::span<const int> labels, Phase phase) {
  if (static_cast<int>(z.row_size()) != profile_.noise_dim) {
    fail(Errc::ShapeMismatch,
         "generator noise has " + std::to_string(z.row_size()) + " dims, expected " + std::to_string(profile_.noise_dim));
  }
  for (T v : z.values()) {
    if (!std::isfinite(static_cast<double>(v))) fail(Errc::InvalidArgument, "generator noise is not finite");
  }
  return body_.forward(concat_features(z, labels, profile_.num_classes), Pass{phase, false});
}

template <typename T>
Tensor<T> Generator<T>::backward(const Tensor<T>& d_image, BackwardOptions opts) {
  return body_.backward(d_image, opts);
}

// ---------------------------------------------------------------- Discriminator

template <typename T>
Discriminator<T>::Discriminator(const Profile& profile, Rng& rng) : profile_(profile) {
  profile_.validate();
  add_conv_trunk(body_, profile_, profile_.channels + profile_.num_classes, profile_.discriminator_kernels, rng);
  const int t = profile_.trunk_size();
  body_.template add<Dense<T>>("head", t * t * profile_.discriminator_kernels[3], 1, profile_.init_stddev, rng);
}

template <typename T>
Tensor<T> Discriminator<T>::condition(const Tensor<T>& x, std::span<const int> labels) const {
  if (x.h() != profile_.image_size || x.w() != profile_.image_size || x.c() != profile_.channels) {
    fail(Errc::ShapeMismatch, "discriminator input " + x.shape_string() + " does not match profile");
  }
  return append_label_channels(x, labels, profile_.num_classes);
}

template <typename T>
Tensor<T> Discriminator<T>::logits(const Tensor<T>& conditioned, Pass pass) {
  if (conditioned.c() != profile_.channels + profile_.num_classes) {
    fail(Errc::ShapeMismatch, "discriminator expects conditioned input, got " + conditioned.shape_string());
  }
  return body_.forward(conditioned, pass);
}

template <typename T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& d_logits, BackwardOptions opts) {
  return body_.backward(d_logits, opts);
}

template <typename T>
Tensor<T> Discriminator<T>::probability(const Tensor<T>& x, std::span<const int> labels) {
  Tensor<T> out = logits(condition(x, labels), Pass{Phase::Inference, false});
  for (auto& v : out.values()) v = sigmoid(v);
  return out;
}

// ---------------------------------------------------------------- Classifier

template <typename T>
Classifier<T>::Classifier(const Profile& profile, Rng& rng) : profile_(profile) {
  profile_.validate();
  add_conv_trunk(trunk_, profile_, profile_.channels, profile_.classifier_kernels, rng);
  head_.template add<Dense<T>>("head", profile_.classifier_feature_dim(), profile_.num_classes, profile_.init_stddev,
                               rng);
}

template <typename T>
typename Classifier<T>::Output Classifier<T>::forward(const Tensor<T>& x, Phase phase) {
  if (x.h() != profile_.image_size || x.w() != profile_.image_size || x.c() != profile_.channels) {
    fail(Errc::ShapeMismatch, "classifier input " + x.shape_string() + " does not match profile");
  }
  Output out;
  out.features = trunk_.forward(x, Pass{phase, false});
  out.logits = head_.forward(out.features, Pass{phase, false});
  return out;
}

template <typename T>
Tensor<T> Classifier<T>::backward(const Tensor<T>& d_logits, BackwardOptions opts) {
  BackwardOptions head_opts = opts;
  head_opts.input_grad = true;
  const Tensor<T> d_features = head_.backward(d_logits, head_opts);
  return trunk_.backward(d_features, opts);
}

template <typename T>
std::vector<Param<T>*> Classifier<T>::params() {
  auto out = trunk_.params();
  for (auto* p : head_.params()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------- Autoencoder

template <typename T>
Autoencoder<T>::Autoencoder(const Profile& profile, Rng& rng)
    : profile_(profile), decoder_((profile.validate(), profile), rng) {
  add_conv_trunk(encoder_, profile_, profile_.channels, profile_.discriminator_kernels, rng);
  const int t = profile_.trunk_size();
  encoder_.template add<Dense<T>>("latent", t * t * profile_.discriminator_kernels[3], profile_.noise_dim,
                                  profile_.init_stddev, rng);
  // Standardized codes: the decoder is pretrained on inputs with the same
  // per-dimension scale as the generator's N(0, 1) noise. Raw codes are tiny
  // at initialization, so epsilon must sit well below their variance.
  encoder_.template add<BatchNorm<T>>("latent.bn", profile_.noise_dim, false, 1e-10);
}

template <typename T>
Tensor<T> Autoencoder<T>::encode(const Tensor<T>& x, Phase phase) {
  return encoder_.forward(x, Pass{phase, false});
}

template <typename T>
Tensor<T> Autoencoder<T>::reconstruct(const Tensor<T>& x, std::span<const int> labels, Phase phase) {
  return decoder_.forward(encode(x, phase), labels, phase);
}

template <typename T>
void Autoencoder<T>::backward(const Tensor<T>& d_reconstruction) {
  const Tensor<T> d_input = decoder_.backward(d_reconstruction, BackwardOptions{true, true});
  Tensor<T> d_latent = Tensor<T>::matrix(d_input.n(), profile_.noise_dim);
  for (int i = 0; i < d_input.n(); ++i) {
    std::copy_n(d_input.row(i).begin(), profile_.noise_dim, d_latent.row(i).begin());
  }
  encoder_.backward(d_latent, BackwardOptions{false, true});
}

template <typename T>
std::vector<Param<T>*> Autoencoder<T>::params() {
  auto out = encoder_.params();
  for (auto* p : decoder_.params()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------- copies

template <typename T>
void copy_parameters(const std::vector<Param<T>*>& from, const std::vector<Param<T>*>& to) {
  if (from.size() != to.size()) {
    fail(Errc::ShapeMismatch, "parameter count " + std::to_string(from.size()) + " vs " + std::to_string(to.size()));
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i]->name != to[i]->name || from[i]->shape != to[i]->shape) {
      fail(Errc::ShapeMismatch, "parameter '" + from[i]->name + "' does not match '" + to[i]->name + "'");
    }
    to[i]->value = from[i]->value;
  }
}

template <typename T>
void init_generator_from_decoder(Autoencoder<T>& autoencoder, Generator<T>& generator) {
  if (!(autoencoder.decoder().profile() == generator.profile())) {
    fail(Errc::ShapeMismatch, "decoder and generator profiles differ");
  }
  copy_parameters(autoencoder.decoder().params(), generator.params());
  copy_parameters(autoencoder.decoder().buffers(), generator.buffers());
}

template <typename T>
Generator<T> init_generator_from_decoder(const Autoencoder<T>& autoencoder) {
  return autoencoder.decoder();
}

#define TPGAN_INSTANTIATE(T)                                                                      \
  template T sigmoid<T>(T);                                                                       \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                \
  template class Generator<T>;                                                                    \
  template class Discriminator<T>;                                                                \
  template class Classifier<T>;                                                                   \
  template class Autoencoder<T>;                                                                  \
  template void copy_parameters<T>(const std::vector<Param<T>*>&, const std::vector<Param<T>*>&); \
  template void init_generator_from_decoder<T>(Autoencoder<T>&, Generator<T>&);                   \
  template Generator<T> init_generator_from_decoder<T>(const Autoencoder<T>&);

TPGAN_INSTANTIATE(float)
TPGAN_INSTANTIATE(double)
#undef TPGAN_INSTANTIATE

}  // namespace tpgan::nn
