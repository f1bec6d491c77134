#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracle/reference.hpp"
#include "support.hpp"
#include "tpgan/nn/checkpoint.hpp"
#include "tpgan/nn/networks.hpp"
#include "tpgan/nn/optimizer.hpp"

using namespace tpgan;
using namespace tpgan::nn;
using testing_support::random_labels;
using testing_support::random_noise;
using testing_support::random_tensor;
using testing_support::tiny_profile;

namespace {

// Fixed projection so every output element matters to the scalar loss.
template <typename T>
double project(const Tensor<T>& out, std::vector<double>& weights) {
  if (weights.size() != out.size()) {
    weights.resize(out.size());
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = std::sin(0.37 * static_cast<double>(i) + 0.1);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += weights[i] * static_cast<double>(out[i]);
  return s;
}

template <typename T>
Tensor<T> weights_tensor(const Tensor<T>& like, const std::vector<double>& w) {
  Tensor<T> t(like.n(), like.h(), like.w(), like.c());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(w[i]);
  return t;
}

bool close_relative(double analytic, double numeric, double rel, double floor = 1e-6) {
  return std::abs(analytic - numeric) <= rel * std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences on `count` random elements of the parameter list.
template <typename F>
void check_param_gradients(std::vector<Param<double>*> params, F loss, int count, std::uint64_t seed,
                           const char* what) {
  std::vector<std::pair<Param<double>*, std::size_t>> all;
  for (auto* p : params)
    for (std::size_t i = 0; i < p->size(); ++i) all.emplace_back(p, i);
  Rng rng(seed);
  const double h = 1e-5;
  for (std::size_t pick : rng.sample_without_replacement(all.size(), static_cast<std::size_t>(count))) {
    auto [p, i] = all[pick];
    const double analytic = p->grad[i];
    const double saved = p->value[i];
    p->value[i] = saved + h;
    const double up = loss();
    p->value[i] = saved - h;
    const double down = loss();
    p->value[i] = saved;
    const double numeric = (up - down) / (2 * h);
    EXPECT_TRUE(close_relative(analytic, numeric, 1e-3, 1e-5))
        << what << " " << p->name << "[" << i << "]: analytic " << analytic << " numeric " << numeric;
  }
}

}  // namespace

TEST(Generator, ShapeAndRangeAtFullProfile) {
  Rng rng(1);
  Generator<float> g(Profile::full(1, 3), rng);
  const Tensor<float> x = g.forward(random_noise<float>(1, 128, rng), std::vector<int>{0}, Phase::Inference);
  EXPECT_EQ(x.shape_string(), "[1,64,64,1]");
  for (float v : x.values()) EXPECT_LT(std::abs(v), 1.0f);
}

TEST(Generator, TanhKeepsMagnitudeBelowOneOnSaturation) {
  Rng rng(2);
  Generator<float> g(tiny_profile(), rng);
  testing_support::scale_params(g.params(), 400.0);
  const Tensor<float> x = g.forward(random_noise<float>(4, 6, rng), std::vector<int>{0, 1, 2, 0}, Phase::Train);
  for (float v : x.values()) EXPECT_LT(std::abs(v), 1.0f);
}

TEST(Generator, InferenceIsDeterministic) {
  Rng rng(3);
  Generator<float> g(Profile::desk(3, 3), rng);
  const auto z = random_noise<float>(2, 128, rng);
  const std::vector<int> y{1, 2};
  EXPECT_EQ(g.forward(z, y, Phase::Inference), g.forward(z, y, Phase::Inference));
}

TEST(Generator, WrongNoiseDimensionIsShapeMismatch) {
  Rng rng(4);
  Generator<float> g(tiny_profile(), rng);
  try {
    g.forward(random_noise<float>(1, 7, rng), std::vector<int>{0}, Phase::Train);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(Discriminator, ProbabilityInOpenUnitInterval) {
  Rng rng(5);
  Discriminator<float> d(Profile::desk(1, 3), rng);
  const auto x = random_tensor<float>(5, 32, 32, 1, rng);
  const auto p = d.probability(x, std::vector<int>{0, 1, 2, 1, 0});
  for (float v : p.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_EQ(p, d.probability(x, std::vector<int>{0, 1, 2, 1, 0}));
}

TEST(Discriminator, RejectsWrongImageShape) {
  Rng rng(6);
  Discriminator<float> d(tiny_profile(), rng);
  EXPECT_THROW(d.condition(Tensor<float>(1, 8, 8, 1), std::vector<int>{0}), Error);
}

TEST(Classifier, RowsSumToOne) {
  Rng rng(7);
  Classifier<float> c(Profile::desk(1, 3), rng);
  const auto out = c.forward(random_tensor<float>(6, 32, 32, 1, rng), Phase::Inference);
  const auto p = softmax(out.logits);
  for (int i = 0; i < p.n(); ++i) {
    double s = 0.0;
    for (float v : p.row(i)) {
      EXPECT_GT(v, 0.0f);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  EXPECT_EQ(static_cast<int>(out.features.row_size()), Profile::desk(1, 3).classifier_feature_dim());
}

TEST(Oracle, DiscriminatorForwardMatchesScalarLoops) {
  Rng rng(8);
  const Profile p = tiny_profile(2, 3);
  Discriminator<double> d(p, rng);
  testing_support::scale_params(d.params(), 10.0);
  const auto x = random_tensor<double>(3, 16, 16, 2, rng);
  const std::vector<int> y{2, 0, 1};
  const auto got = d.logits(d.condition(x, y));
  const auto want = oracle::discriminator_logits(oracle::weights_of(d.params()), p, oracle::img_of(x), y);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
}

TEST(Oracle, GeneratorForwardMatchesScalarLoops) {
  Rng rng(9);
  const Profile p = tiny_profile(3, 2, 5);
  Generator<double> g(p, rng);
  testing_support::scale_params(g.params(), 10.0);
  const auto z = random_noise<double>(4, 5, rng);
  const std::vector<int> y{1, 0, 0, 1};
  const auto got = g.forward(z, y, Phase::Train);
  const auto want =
      oracle::generator_train(oracle::weights_of(g.params()), p, oracle::img_of(z), y, BatchNorm<double>::kEpsilon);
  ASSERT_EQ(got.size(), want.v.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want.v[i], 1e-10);
}

TEST(Oracle, ClassifierForwardMatchesScalarLoops) {
  Rng rng(10);
  const Profile p = tiny_profile(1, 4);
  Classifier<double> c(p, rng);
  testing_support::scale_params(c.params(), 10.0);
  const auto x = random_tensor<double>(3, 16, 16, 1, rng);
  const auto got = softmax(c.forward(x).logits);
  const auto want = oracle::classifier_probs(oracle::weights_of(c.params()), p, oracle::img_of(x));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(got[i * 4 + j], want[i][j], 1e-12);
}

TEST(Gradients, GeneratorParametersMatchFiniteDifferences) {
  Rng rng(11);
  const Profile p = tiny_profile(1, 3, 6);
  Generator<double> g(p, rng);
  testing_support::scale_params(g.params(), 15.0);
  const auto z = random_noise<double>(4, 6, rng);
  const std::vector<int> y{0, 1, 2, 1};
  std::vector<double> w;
  auto loss = [&] { return project(g.forward(z, y, Phase::Train), w); };
  loss();
  zero_grad(g.params());
  const auto out = g.forward(z, y, Phase::Train);
  g.backward(weights_tensor(out, w), BackwardOptions{false, true});
  check_param_gradients(g.params(), loss, 10, 1, "generator");
}

TEST(Gradients, DiscriminatorParametersMatchFiniteDifferences) {
  Rng rng(12);
  const Profile p = tiny_profile(1, 3);
  Discriminator<double> d(p, rng);
  testing_support::scale_params(d.params(), 15.0);
  const auto x = d.condition(random_tensor<double>(3, 16, 16, 1, rng), std::vector<int>{0, 2, 1});
  std::vector<double> w;
  auto loss = [&] { return project(d.logits(x), w); };
  loss();
  zero_grad(d.params());
  const auto out = d.logits(x);
  d.backward(weights_tensor(out, w), BackwardOptions{false, true});
  check_param_gradients(d.params(), loss, 10, 2, "discriminator");
}

TEST(Gradients, ClassifierParametersMatchFiniteDifferences) {
  Rng rng(13);
  Classifier<double> c(tiny_profile(1, 3), rng);
  testing_support::scale_params(c.params(), 15.0);
  const auto x = random_tensor<double>(3, 16, 16, 1, rng);
  std::vector<double> w;
  auto loss = [&] { return project(c.forward(x).logits, w); };
  loss();
  zero_grad(c.params());
  const auto out = c.forward(x).logits;
  c.backward(weights_tensor(out, w), BackwardOptions{false, true});
  check_param_gradients(c.params(), loss, 10, 3, "classifier");
}

TEST(Gradients, AutoencoderParametersMatchFiniteDifferences) {
  Rng rng(14);
  Autoencoder<double> ae(tiny_profile(1, 2, 4), rng);
  testing_support::scale_params(ae.params(), 15.0);
  const auto x = random_tensor<double>(3, 16, 16, 1, rng);
  const std::vector<int> y{0, 1, 1};
  std::vector<double> w;
  auto loss = [&] { return project(ae.reconstruct(x, y), w); };
  loss();
  zero_grad(ae.params());
  const auto out = ae.reconstruct(x, y);
  ae.backward(weights_tensor(out, w));
  check_param_gradients(ae.params(), loss, 10, 4, "autoencoder");
}

TEST(Gradients, DiscriminatorInputGradientMatchesFiniteDifferences) {
  Rng rng(15);
  Discriminator<double> d(tiny_profile(1, 2), rng);
  testing_support::scale_params(d.params(), 15.0);
  auto x = d.condition(random_tensor<double>(1, 16, 16, 1, rng), std::vector<int>{1});
  const auto out = d.logits(x);
  Tensor<double> one = out;
  one[0] = 1.0;
  const auto grad = d.backward(one, BackwardOptions{true, false});
  const double h = 1e-5;
  for (std::size_t pick : rng.sample_without_replacement(x.size(), 20)) {
    const double saved = x[pick];
    x[pick] = saved + h;
    const double up = d.logits(x)[0];
    x[pick] = saved - h;
    const double down = d.logits(x)[0];
    x[pick] = saved;
    EXPECT_TRUE(close_relative(grad[pick], (up - down) / (2 * h), 1e-4, 1e-7)) << pick;
  }
}

TEST(DualPass, TangentHalfIsTheDirectionalDerivative) {
  Rng rng(16);
  Discriminator<double> d(tiny_profile(1, 3), rng);
  testing_support::scale_params(d.params(), 15.0);
  const auto x = d.condition(random_tensor<double>(2, 16, 16, 1, rng), std::vector<int>{0, 2});
  const auto v = random_tensor<double>(2, 16, 16, 4, rng);
  const auto dual = d.logits(concat_batch(x, v), Pass{Phase::Train, true});
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Tensor<double> up = x, down = x;
    for (std::size_t j = 0; j < x.row_size(); ++j) {
      up.row(i)[j] += h * v.row(i)[j];
      down.row(i)[j] -= h * v.row(i)[j];
    }
    const double numeric = (d.logits(up)[i] - d.logits(down)[i]) / (2 * h);
    EXPECT_NEAR(dual[i], d.logits(x)[i], 1e-12);
    EXPECT_TRUE(close_relative(dual[2 + i], numeric, 1e-6, 1e-8)) << dual[2 + i] << " vs " << numeric;
  }
}

TEST(BatchNorm, MovingStatisticsConvergeToTheBatchStatistics) {
  Rng rng(21);
  BatchNorm<double> bn("bn", 3);
  Tensor<double> x = random_tensor<double>(8, 4, 4, 3, rng);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 5.0 + 0.1 * x[i];
  const Tensor<double> train = bn.forward(x, Pass{Phase::Train, false});
  // One update moves the moving mean a (1 - momentum) step from zero.
  double mean0 = 0.0;
  for (std::size_t p = 0; p < x.size() / 3; ++p) mean0 += x[p * 3] / (x.size() / 3);
  EXPECT_NEAR(bn.buffers()[0]->value[0], (1 - BatchNorm<double>::kMomentum) * mean0, 1e-12);
  for (int i = 0; i < 300; ++i) bn.forward(x, Pass{Phase::Train, false});
  const Tensor<double> inference = bn.forward(x, Pass{Phase::Inference, false});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(inference[i], train[i], 1e-6);
}

TEST(Classifier, OverfitsASingleSample) {
  Rng rng(17);
  const Profile p = Profile::desk(1, 3);
  Classifier<float> c(p, rng);
  Adam<float> opt({1e-3, 0.5, 0.9, 1e-8});
  const auto x = random_tensor<float>(1, 32, 32, 1, rng);
  for (int step = 0; step < 60; ++step) {
    zero_grad(c.params());
    const auto probs = softmax(c.forward(x).logits);
    Tensor<float> d = probs;
    d[2] -= 1.0f;
    c.backward(d, BackwardOptions{false, true});
    opt.step(c.params());
  }
  const auto logits = c.forward(x, Phase::Inference).logits;
  EXPECT_EQ(std::max_element(logits.values().begin(), logits.values().end()) - logits.values().begin(), 2);
}

TEST(Transfer, GeneratorEqualsDecoderBitwiseAndIsIsolated) {
  Rng rng(18);
  const Profile p = tiny_profile(1, 3, 6);
  Autoencoder<float> ae(p, rng);
  Rng other(99);
  Generator<float> g(p, other);
  init_generator_from_decoder(ae, g);
  const auto z = random_noise<float>(10, 6, rng);
  const auto y = random_labels(10, 3, rng);
  EXPECT_EQ(g.forward(z, y, Phase::Inference), ae.decoder().forward(z, y, Phase::Inference));

  const auto before = ae.decoder().forward(z, y, Phase::Inference);
  for (auto* param : g.params())
    for (auto& v : param->value) v += 0.5f;
  EXPECT_EQ(ae.decoder().forward(z, y, Phase::Inference), before);
  EXPECT_NE(g.forward(z, y, Phase::Inference), before);

  const Generator<float> copy = init_generator_from_decoder(ae);
  auto copy_params = const_cast<Generator<float>&>(copy).params();
  auto dec_params = ae.decoder().params();
  for (std::size_t i = 0; i < copy_params.size(); ++i) EXPECT_EQ(copy_params[i]->value, dec_params[i]->value);
}

TEST(Transfer, DivergentArchitecturesAreRejected) {
  Rng rng(19);
  Autoencoder<float> ae(tiny_profile(1, 3, 6), rng);
  Generator<float> g(tiny_profile(1, 3, 7), rng);
  try {
    init_generator_from_decoder(ae, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(Optimizer, AdamConvergesOnQuadraticBowl) {
  Param<double> p("w", {3});
  p.value = {3.0, -2.0, 0.5};
  const std::vector<double> target{0.25, 1.0, -0.75};
  Adam<double> opt({0.05, 0.9, 0.999, 1e-8});
  for (int step = 0; step < 2000; ++step) {
    for (int i = 0; i < 3; ++i) p.grad[i] = 2.0 * (p.value[i] - target[i]) * (i + 1);
    opt.step({&p});
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.value[i], target[i], 1e-4);
  EXPECT_EQ(opt.steps(), 2000);
}

TEST(Optimizer, FirstStepMovesByLearningRate) {
  Param<double> p("w", {2});
  p.value = {1.0, 1.0};
  p.grad = {0.3, -7.0};
  Adam<double> opt({0.01, 0.5, 0.9, 1e-8});
  opt.step({&p});
  EXPECT_NEAR(p.value[0], 0.99, 1e-8);
  EXPECT_NEAR(p.value[1], 1.01, 1e-8);
}

TEST(Checkpoint, EncodeDecodeRoundTripAndCorruption) {
  Rng rng(20);
  Generator<float> g(tiny_profile(), rng);
  Checkpoint ck;
  ck.meta["epoch"] = "7";
  ck.sections.push_back(store_params<float>("generator", g.params()));
  auto bytes = encode_checkpoint(ck);
  EXPECT_EQ(decode_checkpoint(bytes), ck);

  testing_support::TempDir dir("ckpt");
  write_checkpoint(dir.path() / "a.tpck", ck);
  EXPECT_EQ(read_checkpoint(dir.path() / "a.tpck"), ck);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  EXPECT_THROW(decode_checkpoint(flipped), Error);
  bytes.resize(bytes.size() - 3);
  try {
    decode_checkpoint(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptCheckpoint);
  }

  Rng other(21);
  Generator<float> h(tiny_profile(), other);
  load_params<float>(ck.section("generator"), h.params());
  const auto z = random_noise<float>(2, 6, rng);
  EXPECT_EQ(h.forward(z, std::vector<int>{0, 1}, Phase::Train), g.forward(z, std::vector<int>{0, 1}, Phase::Train));
}
