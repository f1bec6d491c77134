#include "tpgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tpgan/losses.hpp"

namespace tpgan {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPretrainStream = 2;
constexpr std::uint64_t kEpochStreamBase = 1000;

template <typename F>
auto guard_divergence(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::NonFiniteLoss || e.code() == Errc::NonFiniteGradient) {
      fail(Errc::DivergedTraining, e.what());
    }
    throw;
  }
}

void require_finite_norm(double norm, const char* what) {
  if (!std::isfinite(norm)) fail(Errc::DivergedTraining, std::string(what) + " gradient is not finite");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<nn::Param<float>> optimizer_layout(const std::vector<nn::Param<float>*>& params) {
  std::vector<nn::Param<float>> out;
  for (const auto* p : params) {
    out.emplace_back(p->name + ".m", p->shape);
    out.emplace_back(p->name + ".v", p->shape);
  }
  return out;
}

template <typename P>
std::vector<P*> pointers(std::vector<P>& v) {
  std::vector<P*> out;
  for (auto& x : v) out.push_back(&x);
  return out;
}

nn::StoredSection store_optimizer(const std::string& name, const nn::Adam<float>& opt,
                                  const std::vector<nn::Param<float>*>& params) {
  auto state = opt.export_state(params);
  return nn::store_params<float>(name, pointers(state));
}

void load_optimizer(const nn::Checkpoint& ck, const std::string& name, nn::Adam<float>& opt,
                    const std::vector<nn::Param<float>*>& params, std::int64_t steps) {
  auto layout = optimizer_layout(params);
  nn::load_params<float>(ck.section(name), pointers(layout));
  opt.import_state(params, layout, steps);
}

const std::string& meta(const nn::Checkpoint& ck, const std::string& key) {
  const auto it = ck.meta.find(key);
  if (it == ck.meta.end()) fail(Errc::CorruptCheckpoint, "checkpoint lacks '" + key + "'");
  return it->second;
}

std::int64_t meta_int(const nn::Checkpoint& ck, const std::string& key) {
  try {
    return std::stoll(meta(ck, key));
  } catch (const std::logic_error&) {
    fail(Errc::CorruptCheckpoint, "checkpoint field '" + key + "' is not an integer");
  }
}

template <std::size_t N>
std::string join_array(const std::array<int, N>& a) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + std::to_string(a[i]);
  return out;
}

template <std::size_t N>
std::array<int, N> split_array(const nn::Checkpoint& ck, const std::string& key) {
  std::array<int, N> out{};
  std::stringstream ss(meta(ck, key));
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) fail(Errc::CorruptCheckpoint, "checkpoint field '" + key + "' has too many entries");
    try {
      out[i++] = std::stoi(item);
    } catch (const std::logic_error&) {
      fail(Errc::CorruptCheckpoint, "checkpoint field '" + key + "' is not a list of integers");
    }
  }
  if (i != N) fail(Errc::CorruptCheckpoint, "checkpoint field '" + key + "' has too few entries");
  return out;
}

double meta_double(const nn::Checkpoint& ck, const std::string& key) {
  try {
    return std::stod(meta(ck, key));
  } catch (const std::logic_error&) {
    fail(Errc::CorruptCheckpoint, "checkpoint field '" + key + "' is not a number");
  }
}

// The whole architecture is stored, so checkpoints of any profile reload.
void profile_to_meta(const nn::Profile& p, nn::Checkpoint& ck) {
  ck.meta["profile"] = p.name;
  ck.meta["image_size"] = std::to_string(p.image_size);
  ck.meta["channels"] = std::to_string(p.channels);
  ck.meta["num_classes"] = std::to_string(p.num_classes);
  ck.meta["noise_dim"] = std::to_string(p.noise_dim);
  ck.meta["discriminator_kernels"] = join_array(p.discriminator_kernels);
  ck.meta["generator_kernels"] = join_array(p.generator_kernels);
  ck.meta["classifier_kernels"] = join_array(p.classifier_kernels);
  ck.meta["generator_seed_channels"] = std::to_string(p.generator_seed_channels);
  ck.meta["kernel_size"] = std::to_string(p.kernel_size);
  ck.meta["stride"] = std::to_string(p.stride);
  ck.meta["leaky_slope"] = format_double(p.leaky_slope);
  ck.meta["init_stddev"] = format_double(p.init_stddev);
}

nn::Profile profile_from_meta(const nn::Checkpoint& ck) {
  nn::Profile p;
  p.name = meta(ck, "profile");
  p.image_size = static_cast<int>(meta_int(ck, "image_size"));
  p.channels = static_cast<int>(meta_int(ck, "channels"));
  p.num_classes = static_cast<int>(meta_int(ck, "num_classes"));
  p.noise_dim = static_cast<int>(meta_int(ck, "noise_dim"));
  p.discriminator_kernels = split_array<4>(ck, "discriminator_kernels");
  p.generator_kernels = split_array<3>(ck, "generator_kernels");
  p.classifier_kernels = split_array<4>(ck, "classifier_kernels");
  p.generator_seed_channels = static_cast<int>(meta_int(ck, "generator_seed_channels"));
  p.kernel_size = static_cast<int>(meta_int(ck, "kernel_size"));
  p.stride = static_cast<int>(meta_int(ck, "stride"));
  p.leaky_slope = meta_double(ck, "leaky_slope");
  p.init_stddev = meta_double(ck, "init_stddev");
  try {
    p.validate();
  } catch (const Error& e) {
    fail(Errc::CorruptCheckpoint, std::string("checkpoint profile is invalid: ") + e.what());
  }
  return p;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::V1: return "v1";
    case Variant::V2: return "v2";
    case Variant::V3: return "v3";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "baseline") return Variant::Baseline;
  if (text == "v1") return Variant::V1;
  if (text == "v2") return Variant::V2;
  if (text == "v3") return Variant::V3;
  fail(Errc::Config, "unknown variant '" + std::string(text) + "' (expected baseline, v1, v2 or v3)");
}

VariantFlags flags_for(Variant v) {
  switch (v) {
    case Variant::Baseline: return {false, false, false};
    case Variant::V1: return {true, false, false};
    case Variant::V2: return {true, true, false};
    case Variant::V3: return {true, true, true};
  }
  return {};
}

void TrainConfig::validate() const {
  if (p_epochs < 0 || a_epochs < 0) fail(Errc::Config, "epoch counts must be non-negative");
  if (batch_size < 1) fail(Errc::Config, "batch_size must be positive");
  if (d_steps_per_g_step < 1) fail(Errc::Config, "d_steps_per_g_step must be positive");
  if (iterations_per_epoch < 0) fail(Errc::Config, "iterations_per_epoch must be non-negative");
  if (eval_every < 1) fail(Errc::Config, "eval_every must be positive");
  if (lambda < 0.0) fail(Errc::Config, "lambda must be non-negative");
  if (!(learning_rate > 0.0)) fail(Errc::Config, "learning_rate must be positive");
  if (!(momentum_1 >= 0.0 && momentum_1 < 1.0 && momentum_2 >= 0.0 && momentum_2 < 1.0)) {
    fail(Errc::Config, "momentums must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail(Errc::Config, "epsilon must be positive");
  if (!(pretrain_holdout >= 0.0 && pretrain_holdout < 1.0)) fail(Errc::Config, "pretrain_holdout must lie in [0, 1)");
  nn::Profile::by_name(profile, 1, 2);
}

int TrainConfig::iterations(std::size_t train_size) const {
  if (iterations_per_epoch > 0) return iterations_per_epoch;
  return static_cast<int>((train_size + batch_size - 1) / batch_size);
}

TrainState::TrainState(const nn::Profile& p, const TrainConfig& config)
    : TrainState(p, config, Rng(derive_seed(config.seed, kInitStream))) {}

TrainState::TrainState(const nn::Profile& p, const TrainConfig& config, Rng rng)
    : profile(p),
      generator(p, rng),
      discriminator(p, rng),
      classifier(p, rng),
      opt_g(config.adam()),
      opt_d(config.adam()),
      opt_c(config.adam()) {}

Rng epoch_rng(const TrainConfig& config, int epoch) {
  return Rng(derive_seed(config.seed, kEpochStreamBase + static_cast<std::uint64_t>(epoch)));
}

nn::Profile profile_for(const TrainConfig& config, const Dataset& train) {
  nn::Profile p = nn::Profile::by_name(config.profile, train.channels, train.num_classes());
  if (train.height != p.image_size || train.width != p.image_size) {
    fail(Errc::Config, "profile '" + config.profile + "' expects " + std::to_string(p.image_size) + "x" +
                           std::to_string(p.image_size) + " images, data is " + std::to_string(train.height) + "x" +
                           std::to_string(train.width));
  }
  return p;
}

Tensor<float> sample_noise(int n, int noise_dim, Rng& rng) {
  Tensor<float> z = Tensor<float>::matrix(n, noise_dim);
  for (auto& v : z.values()) v = static_cast<float>(rng.normal());
  return z;
}

std::vector<int> sample_labels(int n, int num_classes, Rng& rng) {
  std::vector<int> out(n);
  for (auto& y : out) y = static_cast<int>(rng.index(static_cast<std::size_t>(num_classes)));
  return out;
}

PretrainResult pretrain_autoencoder(const Dataset& train, const nn::Profile& profile, const TrainConfig& config) {
  if (train.empty()) fail(Errc::InsufficientData, "pretraining needs a non-empty training set");
  Rng rng(derive_seed(config.seed, kPretrainStream));
  PretrainResult result{nn::Autoencoder<float>(profile, rng), {}, {}};
  if (config.p_epochs == 0) return result;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  const std::size_t holdout = static_cast<std::size_t>(std::floor(config.pretrain_holdout * train.size()));
  const std::vector<std::size_t> held(order.begin(), order.begin() + holdout);
  const std::vector<std::size_t> fit(order.begin() + holdout, order.end());
  if (fit.empty()) fail(Errc::InsufficientData, "holdout leaves nothing to pretrain on");
  if (held.empty()) spdlog::debug("pretraining without a holdout fold ({} samples)", train.size());

  auto labels_of = [&](std::span<const std::size_t> idx) {
    std::vector<int> y;
    for (std::size_t i : idx) y.push_back(train.samples[i].label);
    return y;
  };
  const int m = std::min<int>(config.batch_size, static_cast<int>(fit.size()));
  // Pretraining epochs are always full passes; iterations_per_epoch only
  // concerns the alternating phase.
  const int iterations = static_cast<int>((fit.size() + m - 1) / m);
  nn::Adam<float> opt(config.adam());
  auto& ae = result.autoencoder;
  for (int epoch = 0; epoch < config.p_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int it = 0; it < iterations; ++it) {
      std::vector<std::size_t> idx;
      for (std::size_t k : rng.sample_without_replacement(fit.size(), static_cast<std::size_t>(m))) idx.push_back(fit[k]);
      const Tensor<float> x = train.images(idx);
      const std::vector<int> y = labels_of(idx);
      nn::zero_grad(ae.params());
      const Tensor<float> r = ae.reconstruct(x, y, nn::Phase::Train);
      Tensor<float> d = r;
      double loss = 0.0;
      const double scale = 1.0 / static_cast<double>(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = static_cast<double>(r[i]) - x[i];
        loss += diff * diff * scale;
        d[i] = static_cast<float>(2.0 * diff * scale);
      }
      if (!std::isfinite(loss)) fail(Errc::DivergedTraining, "reconstruction loss is not finite");
      ae.backward(d);
      require_finite_norm(nn::grad_l2_norm(ae.params()), "autoencoder");
      opt.step(ae.params());
      epoch_loss += loss / iterations;
    }
    result.train_loss.push_back(epoch_loss);
    double held_loss = std::nan("");
    if (!held.empty()) {
      const Tensor<float> x = train.images(held);
      const Tensor<float> r = ae.reconstruct(x, labels_of(held), nn::Phase::Inference);
      held_loss = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) held_loss += std::pow(static_cast<double>(r[i]) - x[i], 2);
      held_loss /= static_cast<double>(x.size());
    }
    result.holdout_loss.push_back(held_loss);
    spdlog::debug("pretrain epoch {}: train mse {:.6f}, holdout mse {:.6f}", epoch + 1, epoch_loss, held_loss);
  }
  return result;
}

std::vector<int> minority_labels(const Dataset& train, const ImbalanceSpec& spec) {
  std::vector<int> out;
  for (int c : spec.minority_classes) out.push_back(train.class_index(c));
  return out;
}

EpochLog train_step(TrainState& state, const Dataset& train, const ImbalanceSpec& spec, const TrainConfig& config,
                    Rng& rng) {
  const VariantFlags flags = flags_for(config.variant);
  const int k = state.profile.num_classes;
  const int m = config.batch_size;
  const int iterations = config.iterations(train.size());
  const std::vector<int> minorities = minority_labels(train, spec);
  const DiscriminatorLossOptions d_options{config.lambda, flags.stabilizers, flags.stabilizers, config.penalty_link};
  const GeneratorLossOptions g_options{flags.classifier_term};

  EpochLog row;
  row.epoch = state.epoch + 1;
  for (int it = 0; it < iterations; ++it) {
    if (flags.adversarial) {
      for (int s = 0; s < config.d_steps_per_g_step; ++s) {
        const Batch actual = sample_actual_batch(train, m, rng);
        const Tensor<float> z = sample_noise(m, state.profile.noise_dim, rng);
        const std::vector<int> y_gen = sample_labels(m, k, rng);
        const std::vector<int> y_mis = flags.stabilizers ? sample_mislabels(actual.labels, k, rng) : std::vector<int>{};
        nn::zero_grad(state.discriminator.params());
        const auto terms = guard_divergence([&] {
          return discriminator_loss<float>(state.discriminator, state.generator, actual.images, actual.labels, z, y_gen,
                                           y_mis, d_options, rng, true, nn::Phase::Train);
        });
        require_finite_norm(nn::grad_l2_norm(state.discriminator.params()), "discriminator");
        state.opt_d.step(state.discriminator.params());
        row.loss_d += terms.total / (iterations * config.d_steps_per_g_step);
      }

      const Tensor<float> z = sample_noise(m, state.profile.noise_dim, rng);
      const std::vector<int> y_gen = sample_labels(m, k, rng);
      nn::zero_grad(state.generator.params());
      const auto g_terms = guard_divergence([&] {
        return generator_loss<float>(state.generator, state.discriminator, state.classifier, z, y_gen, g_options, true);
      });
      const double norm = nn::grad_l2_norm(state.generator.params());
      require_finite_norm(norm, "generator");
      state.opt_g.step(state.generator.params());
      row.loss_g += g_terms.total / iterations;
      row.grad_norm_g += norm / iterations;
    }

    const Batch actual = sample_actual_batch(train, m, rng);
    Batch generated;
    if (flags.adversarial) {
      auto counts = compute_generation_counts(actual.labels, k, minorities);
      // A small batch can draw a minority class more often than the majority
      // class; every other class is then topped up too so the batch balances.
      const auto drawn = actual.class_counts(k);
      const int target = *std::max_element(drawn.begin(), drawn.end());
      for (int c = 0; c < k; ++c)
        if (std::find(minorities.begin(), minorities.end(), c) == minorities.end()) counts[c] = target - drawn[c];
      generated.labels = expand_counts(counts);
      if (!generated.labels.empty()) {
        const Tensor<float> z = sample_noise(static_cast<int>(generated.labels.size()), state.profile.noise_dim, rng);
        generated.images = state.generator.forward(z, generated.labels, nn::Phase::Inference);
      }
      generated.origin.assign(generated.labels.size(), Origin::Generated);
    }
    if (flags.adversarial) {
      const Batch balanced = assemble_balanced_batch(actual, generated, k);
      if (state.classifier_batch_hook) state.classifier_batch_hook(balanced);
    } else if (state.classifier_batch_hook) {
      state.classifier_batch_hook(actual);
    }
    nn::zero_grad(state.classifier.params());
    const auto c_terms = guard_divergence([&] {
      return classifier_loss<float>(state.classifier, actual.images, actual.labels, generated.images, generated.labels,
                                    true);
    });
    require_finite_norm(nn::grad_l2_norm(state.classifier.params()), "classifier");
    state.opt_c.step(state.classifier.params());
    row.loss_c += c_terms.total / iterations;
  }
  ++state.epoch;
  state.log.push_back(row);
  return row;
}

nn::Checkpoint make_checkpoint(TrainState& state, const TrainConfig& config) {
  nn::Checkpoint ck;
  profile_to_meta(state.profile, ck);
  ck.meta["epoch"] = std::to_string(state.epoch);
  ck.meta["variant"] = std::string(to_string(config.variant));
  ck.meta["seed"] = std::to_string(config.seed);
  ck.meta["adam.generator.steps"] = std::to_string(state.opt_g.steps());
  ck.meta["adam.discriminator.steps"] = std::to_string(state.opt_d.steps());
  ck.meta["adam.classifier.steps"] = std::to_string(state.opt_c.steps());
  ck.meta["log"] = format_training_log(state.log);
  ck.sections.push_back(nn::store_params<float>("generator", state.generator.params()));
  ck.sections.push_back(nn::store_params<float>("generator.buffers", state.generator.buffers()));
  ck.sections.push_back(nn::store_params<float>("discriminator", state.discriminator.params()));
  ck.sections.push_back(nn::store_params<float>("classifier", state.classifier.params()));
  ck.sections.push_back(store_optimizer("adam.generator", state.opt_g, state.generator.params()));
  ck.sections.push_back(store_optimizer("adam.discriminator", state.opt_d, state.discriminator.params()));
  ck.sections.push_back(store_optimizer("adam.classifier", state.opt_c, state.classifier.params()));
  return ck;
}

void restore_checkpoint(TrainState& state, const nn::Checkpoint& ck) {
  if (!(profile_from_meta(ck) == state.profile)) fail(Errc::CorruptCheckpoint, "checkpoint profile differs from run");
  nn::load_params<float>(ck.section("generator"), state.generator.params());
  nn::load_params<float>(ck.section("generator.buffers"), state.generator.buffers());
  nn::load_params<float>(ck.section("discriminator"), state.discriminator.params());
  nn::load_params<float>(ck.section("classifier"), state.classifier.params());
  load_optimizer(ck, "adam.generator", state.opt_g, state.generator.params(), meta_int(ck, "adam.generator.steps"));
  load_optimizer(ck, "adam.discriminator", state.opt_d, state.discriminator.params(),
                 meta_int(ck, "adam.discriminator.steps"));
  load_optimizer(ck, "adam.classifier", state.opt_c, state.classifier.params(), meta_int(ck, "adam.classifier.steps"));
  state.epoch = static_cast<int>(meta_int(ck, "epoch"));
  state.log = parse_training_log(meta(ck, "log"));
  if (static_cast<int>(state.log.size()) != state.epoch) fail(Errc::CorruptCheckpoint, "log length differs from epoch");
}

nn::Generator<float> generator_from_checkpoint(const nn::Checkpoint& ck) {
  Rng rng(0);
  nn::Generator<float> g(profile_from_meta(ck), rng);
  nn::load_params<float>(ck.section("generator"), g.params());
  nn::load_params<float>(ck.section("generator.buffers"), g.buffers());
  return g;
}

std::string format_training_log(const std::vector<EpochLog>& log) {
  std::string out = "epoch,L_D,L_G,L_C,grad_norm_G,precision,recall,f_score\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + ',' + format_double(r.loss_d) + ',' + format_double(r.loss_g) + ',' +
           format_double(r.loss_c) + ',' + format_double(r.grad_norm_g);
    if (r.eval) {
      out += ',' + format_double(r.eval->precision) + ',' + format_double(r.eval->recall) + ',' +
             format_double(r.eval->f_score);
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

std::vector<EpochLog> parse_training_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<EpochLog> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    while (f.size() < 8) f.emplace_back();
    try {
      EpochLog r;
      r.epoch = std::stoi(f[0]);
      r.loss_d = std::stod(f[1]);
      r.loss_g = std::stod(f[2]);
      r.loss_c = std::stod(f[3]);
      r.grad_norm_g = std::stod(f[4]);
      if (!f[5].empty()) r.eval = EvalPoint{std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
      out.push_back(r);
    } catch (const std::logic_error&) {
      fail(Errc::CorruptCheckpoint, "malformed training log line: " + line);
    }
  }
  return out;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << format_training_log(log);
  if (!out) fail(Errc::Io, "failed writing " + path.string());
}

TrainResult train(const Dataset& train_set, const Dataset& test, const ImbalanceSpec& spec, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  const nn::Profile profile = profile_for(config, train_set);
  TrainState state(profile, config);
  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  if (options.resume_from) {
    restore_checkpoint(state, nn::read_checkpoint(*options.resume_from));
    spdlog::info("resumed at epoch {}", state.epoch);
  } else if (config.variant != Variant::Baseline) {
    if (options.pretrained) {
      state.generator = nn::init_generator_from_decoder(*options.pretrained);
    } else {
      auto pre = pretrain_autoencoder(train_set, profile, config);
      nn::init_generator_from_decoder(pre.autoencoder, state.generator);
    }
  }

  auto persist = [&] {
    if (!options.output_dir) return;
    nn::Checkpoint ck = make_checkpoint(state, config);
    for (const auto& [k, v] : options.checkpoint_meta) ck.meta[k] = v;
    nn::write_checkpoint(*options.output_dir / "checkpoint.tpck", ck);
    write_training_log(*options.output_dir / "training_log.csv", state.log);
  };

  while (state.epoch < config.a_epochs) {
    Rng rng = epoch_rng(config, state.epoch);
    train_step(state, train_set, spec, config, rng);
    if (state.epoch % config.eval_every == 0 || state.epoch == config.a_epochs) {
      const auto m = evaluate_classifier(state.classifier, test);
      state.log.back().eval = EvalPoint{m.scores.macro.precision, m.scores.macro.recall, m.scores.macro.f_score};
      spdlog::info("[{} seed {}] epoch {}/{}: L_D {:.4f} L_G {:.4f} L_C {:.4f} |grad G| {:.4g} F {:.4f}",
                   to_string(config.variant), config.seed, state.epoch, config.a_epochs, state.log.back().loss_d,
                   state.log.back().loss_g, state.log.back().loss_c, state.log.back().grad_norm_g,
                   m.scores.macro.f_score);
      persist();
    }
  }
  MetricsRecord metrics = evaluate_classifier(state.classifier, test);
  if (config.a_epochs == 0) persist();
  return TrainResult{std::move(state), std::move(metrics)};
}

}  // namespace tpgan
