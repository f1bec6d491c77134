#pragma once

#include <array>
#include <span>
#include <string>

#include "tpgan/nn/layers.hpp"

namespace tpgan::nn {

/// Architecture hyperparameters shared by all four networks.
struct Profile {
  std::string name = "full";
  int image_size = 64;
  int channels = 1;
  int num_classes = 3;
  int noise_dim = 128;
  std::array<int, 4> discriminator_kernels{64, 128, 128, 256};
  /// Kernel counts of the first three generator blocks; the last block emits
  /// `channels`.
  std::array<int, 3> generator_kernels{128, 128, 64};
  std::array<int, 4> classifier_kernels{32, 32, 128, 256};
  /// Channels of the projected seed grid feeding the first generator block.
  int generator_seed_channels = 256;
  int kernel_size = 4;
  int stride = 2;
  double leaky_slope = 0.2;
  double init_stddev = 0.02;

  /// Paper-scale networks at 64x64.
  static Profile full(int channels, int num_classes);
  /// Halved kernel counts at 32x32.
  static Profile desk(int channels, int num_classes);
  static Profile by_name(const std::string& name, int channels, int num_classes);

  /// Spatial size of the generator's seed grid (image_size / 16).
  int seed_size() const;
  /// Discriminator/encoder trunk output size (image_size / 16, at least 1).
  int trunk_size() const;
  int classifier_feature_dim() const;
  void validate() const;
  bool operator==(const Profile&) const = default;
};

/// G(z, y): noise and one-hot label are concatenated, projected to a seed
/// grid, then upsampled by four transposed-convolution blocks to a tanh image.
template <typename T>
class Generator {
 public:
  Generator(const Profile& profile, Rng& rng);

  /// z: n x noise_dim (as n x 1 x 1 x noise_dim). Returns n x S x S x C.
  Tensor<T> forward(const Tensor<T>& z, std::span<const int> labels, Phase phase);
  /// Backpropagates an image gradient. Returns d/d[z | one_hot(y)] when
  /// opts.input_grad is set.
  Tensor<T> backward(const Tensor<T>& d_image, BackwardOptions opts);

  std::vector<Param<T>*> params() { return body_.params(); }
  std::vector<Param<T>*> buffers() { return body_.buffers(); }
  const Profile& profile() const { return profile_; }

 private:
  Profile profile_;
  Sequential<T> body_;
};

/// D(x, y): the label is broadcast as constant channels appended to the image;
/// four strided convolution blocks and a linear head give one logit per row.
template <typename T>
class Discriminator {
 public:
  Discriminator(const Profile& profile, Rng& rng);

  /// Image with appended one-hot label channels.
  Tensor<T> condition(const Tensor<T>& x, std::span<const int> labels) const;
  /// Logits (n x 1) for an already-conditioned input.
  Tensor<T> logits(const Tensor<T>& conditioned, Pass pass = {});
  /// Gradient w.r.t. the conditioned input (empty if not requested).
  Tensor<T> backward(const Tensor<T>& d_logits, BackwardOptions opts);
  /// Sigmoid probabilities for convenience.
  Tensor<T> probability(const Tensor<T>& x, std::span<const int> labels);

  std::vector<Param<T>*> params() { return body_.params(); }
  const Profile& profile() const { return profile_; }

 private:
  Profile profile_;
  Sequential<T> body_;
};

/// C(x): four strided convolution blocks; the flattened trunk output is the
/// exported feature vector, followed by a linear softmax head.
template <typename T>
class Classifier {
 public:
  struct Output {
    Tensor<T> logits;
    Tensor<T> features;
  };

  Classifier(const Profile& profile, Rng& rng);

  Output forward(const Tensor<T>& x, Phase phase = Phase::Train);
  /// Backpropagates logit gradients; returns d/dx when requested.
  Tensor<T> backward(const Tensor<T>& d_logits, BackwardOptions opts);

  std::vector<Param<T>*> params();
  const Profile& profile() const { return profile_; }

 private:
  Profile profile_;
  Sequential<T> trunk_;
  Sequential<T> head_;
};

/// Encoder mirrors the discriminator trunk (without label channels) and emits
/// a standardized noise_dim latent; the decoder is a Generator fed the true
/// label.
template <typename T>
class Autoencoder {
 public:
  Autoencoder(const Profile& profile, Rng& rng);

  Tensor<T> encode(const Tensor<T>& x, Phase phase = Phase::Train);
  Tensor<T> reconstruct(const Tensor<T>& x, std::span<const int> labels, Phase phase = Phase::Train);
  /// Backpropagates a reconstruction gradient through decoder and encoder.
  void backward(const Tensor<T>& d_reconstruction);

  Generator<T>& decoder() { return decoder_; }
  const Generator<T>& decoder() const { return decoder_; }
  std::vector<Param<T>*> params();
  const Profile& profile() const { return profile_; }

 private:
  Profile profile_;
  Sequential<T> encoder_;
  Generator<T> decoder_;
};

/// Numerically stable logistic function.
template <typename T>
T sigmoid(T logit);

/// Row-wise softmax of an n x K logit matrix.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Copies parameter values and buffers by name; ShapeMismatch if the two
/// parameter lists differ in names or shapes.
template <typename T>
void copy_parameters(const std::vector<Param<T>*>& from, const std::vector<Param<T>*>& to);

/// Initializes `generator` as a value copy of the autoencoder's decoder.
template <typename T>
void init_generator_from_decoder(Autoencoder<T>& autoencoder, Generator<T>& generator);

/// Returns a fresh generator equal to the autoencoder's decoder.
template <typename T>
Generator<T> init_generator_from_decoder(const Autoencoder<T>& autoencoder);

}  // namespace tpgan::nn
