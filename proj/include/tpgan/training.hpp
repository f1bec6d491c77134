#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpgan/data.hpp"
#include "tpgan/evaluation.hpp"
#include "tpgan/losses.hpp"
#include "tpgan/nn/checkpoint.hpp"
#include "tpgan/nn/networks.hpp"
#include "tpgan/nn/optimizer.hpp"

namespace tpgan {

/// Ablation ladder. Each rung adds to the previous one: V1 trains a
/// conditional GAN that tops up the classifier's batches, V2 adds the
/// classifier term to the generator objective, V3 adds the gradient penalty
/// and the mislabel term to the discriminator objective.
enum class Variant { Baseline, V1, V2, V3 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct VariantFlags {
  bool adversarial = false;
  bool classifier_term = false;
  bool stabilizers = false;
};
VariantFlags flags_for(Variant v);

struct TrainConfig {
  std::string profile = "full";
  int p_epochs = 300;
  int a_epochs = 300;
  int batch_size = 100;
  int d_steps_per_g_step = 10;
  /// Alternating iterations per epoch; 0 means ceil(|train| / batch_size).
  int iterations_per_epoch = 0;
  int eval_every = 10;
  double lambda = 10.0;
  /// Output whose input gradient the penalty pulls toward unit norm.
  OutputLink penalty_link = OutputLink::Identity;
  double learning_rate = 2e-4;
  double momentum_1 = 0.5;
  double momentum_2 = 0.9;
  double epsilon = 1e-8;
  /// Fraction of the training set held out to monitor pretraining.
  double pretrain_holdout = 0.1;
  Variant variant = Variant::V3;
  std::uint64_t seed = 0;

  void validate() const;
  nn::AdamConfig adam() const { return {learning_rate, momentum_1, momentum_2, epsilon}; }
  int iterations(std::size_t train_size) const;
  bool operator==(const TrainConfig&) const = default;
};

struct EvalPoint {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  bool operator==(const EvalPoint&) const = default;
};

/// Per-epoch means over that epoch's iterations. Terms a variant skips are 0.
struct EpochLog {
  int epoch = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double loss_c = 0.0;
  double grad_norm_g = 0.0;
  std::optional<EvalPoint> eval;
  bool operator==(const EpochLog&) const = default;
};

struct TrainState {
  TrainState(const nn::Profile& profile, const TrainConfig& config);

  nn::Profile profile;
  nn::Generator<float> generator;
  nn::Discriminator<float> discriminator;
  nn::Classifier<float> classifier;
  nn::Adam<float> opt_g, opt_d, opt_c;
  int epoch = 0;
  std::vector<EpochLog> log;
  /// Observes every batch the classifier is updated on.
  std::function<void(const Batch&)> classifier_batch_hook;

 private:
  TrainState(const nn::Profile& profile, const TrainConfig& config, Rng rng);
};

struct PretrainResult {
  nn::Autoencoder<float> autoencoder;
  std::vector<double> train_loss;
  std::vector<double> holdout_loss;
};

/// p_epochs epochs of pixel-mean squared reconstruction error. The decoder is
/// fed the true label.
PretrainResult pretrain_autoencoder(const Dataset& train, const nn::Profile& profile, const TrainConfig& config);

/// Compact indices of the spec's minority classes in `train`.
std::vector<int> minority_labels(const Dataset& train, const ImbalanceSpec& spec);

/// One epoch of alternating updates (discriminator, generator, classifier);
/// appends and returns the epoch's log row.
EpochLog train_step(TrainState& state, const Dataset& train, const ImbalanceSpec& spec, const TrainConfig& config,
                    Rng& rng);

/// Per-epoch random stream; makes a resumed run match an uninterrupted one.
Rng epoch_rng(const TrainConfig& config, int epoch);

/// The profile implied by a configuration and a split.
nn::Profile profile_for(const TrainConfig& config, const Dataset& train);

struct TrainOptions {
  /// Checkpoints and training_log.csv go here when set.
  std::optional<std::filesystem::path> output_dir;
  /// Continue from this checkpoint instead of initialising.
  std::optional<std::filesystem::path> resume_from;
  /// Reuse an already pretrained autoencoder (same data, config and seed).
  const nn::Autoencoder<float>* pretrained = nullptr;
  /// Extra checkpoint metadata.
  std::map<std::string, std::string> checkpoint_meta;
};

struct TrainResult {
  TrainState state;
  MetricsRecord metrics;
};

/// Pretrains (variants above baseline), copies the decoder into the
/// generator, runs a_epochs epochs with evaluation every eval_every epochs and
/// at the end, and persists checkpoints and the log when an output directory
/// is given.
TrainResult train(const Dataset& train, const Dataset& test, const ImbalanceSpec& spec, const TrainConfig& config,
                  const TrainOptions& options = {});

nn::Checkpoint make_checkpoint(TrainState& state, const TrainConfig& config);
/// Restores parameters, buffers, optimizer moments, epoch and log.
void restore_checkpoint(TrainState& state, const nn::Checkpoint& checkpoint);
/// Builds the generator stored in a checkpoint.
nn::Generator<float> generator_from_checkpoint(const nn::Checkpoint& checkpoint);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);
std::string format_training_log(const std::vector<EpochLog>& log);
std::vector<EpochLog> parse_training_log(const std::string& text);

/// Standard-normal noise, n x noise_dim.
Tensor<float> sample_noise(int n, int noise_dim, Rng& rng);
/// Labels uniform over num_classes.
std::vector<int> sample_labels(int n, int num_classes, Rng& rng);

}  // namespace tpgan
