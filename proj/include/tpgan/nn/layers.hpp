#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tpgan/rng.hpp"
#include "tpgan/tensor.hpp"

namespace tpgan::nn {

enum class Phase { Train, Inference };

/// Forward pass flags. In dual mode the batch holds a primal half followed by
/// a tangent half of equal size; linear maps act on both, nonlinearities take
/// their local derivative from the primal half, and biases apply only to the
/// primal half. Backpropagating through a dual pass yields gradients of a
/// directional derivative, which is what the gradient penalty needs.
struct Pass {
  Phase phase = Phase::Train;
  bool dual = false;
};

struct BackwardOptions {
  bool input_grad = true;
  bool param_grad = true;
};

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s);
  std::size_t size() const { return value.size(); }
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual Tensor<T> forward(const Tensor<T>& x, Pass pass) = 0;
  /// Returns the input gradient, or an empty tensor when opts.input_grad is
  /// false. Parameter gradients are accumulated, never overwritten.
  virtual Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  /// Non-trainable buffers that still belong in a checkpoint.
  virtual std::vector<Param<T>*> buffers() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Fully connected map over flattened rows.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, int in, int out, double init_stddev, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Pass pass) override;
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) override;
  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  int in_, out_;
  Param<T> kernel_, bias_;
  Tensor<T> input_;
  int primal_rows_ = 0;
};

/// Strided 2-D convolution with "same" padding (output = ceil(input / stride)).
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, double init_stddev, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Pass pass) override;
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) override;
  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  int cin_, cout_, k_, stride_;
  Param<T> kernel_, bias_;
  AlignedVector<T> cols_;
  int n_ = 0, h_ = 0, w_ = 0, ho_ = 0, wo_ = 0;
  int primal_rows_ = 0;
};

/// Transposed convolution with "same" padding (output = input * stride); the
/// exact adjoint of Conv2d on the enlarged grid.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel, int stride, double init_stddev,
                  Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Pass pass) override;
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) override;
  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

 private:
  int cin_, cout_, k_, stride_;
  Param<T> kernel_, bias_;
  Tensor<T> input_;
};

template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  LeakyRelu(std::string name, double slope) : Layer<T>(std::move(name)), slope_(static_cast<T>(slope)) {}
  Tensor<T> forward(const Tensor<T>& x, Pass pass) override;
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LeakyRelu>(*this); }

 private:
  T slope_;
  std::vector<unsigned char> positive_;
  bool dual_ = false;
};

/// Per-channel batch normalization over (n, h, w). Inference uses moving
/// averages of the batch statistics.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  /// Short enough that the moving statistics track a generator that is still
  /// changing after a few hundred steps.
  static constexpr double kMomentum = 0.9;
  static constexpr double kEpsilon = 1e-3;

  /// Without `affine` the scale and shift stay fixed at 1 and 0 and are not
  /// exposed as parameters.
  BatchNorm(std::string name, int channels, bool affine = true, double epsilon = kEpsilon);
  Tensor<T> forward(const Tensor<T>& x, Pass pass) override;
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) override;
  std::vector<Param<T>*> params() override {
    if (!affine_) return {};
    return {&gamma_, &beta_};
  }
  std::vector<Param<T>*> buffers() override { return {&moving_mean_, &moving_var_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }

 private:
  int channels_;
  bool affine_;
  double epsilon_;
  Param<T> gamma_, beta_, moving_mean_, moving_var_;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
  Phase phase_ = Phase::Train;
};

/// tanh, with the output magnitude kept strictly below one.
template <typename T>
class Tanh final : public Layer<T> {
 public:
  explicit Tanh(std::string name) : Layer<T>(std::move(name)) {}
  Tensor<T> forward(const Tensor<T>& x, Pass pass) override;
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Tanh>(*this); }

 private:
  Tensor<T> output_;
};

/// Shape relabeling; (n,h,w,c) <-> (n, h', w', c') with equal row size.
template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(std::string name, int h, int w, int c) : Layer<T>(std::move(name)), h_(h), w_(w), c_(c) {}
  Tensor<T> forward(const Tensor<T>& x, Pass pass) override;
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  int h_, w_, c_;
  int in_h_ = 0, in_w_ = 0, in_c_ = 0;
};

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, Pass pass);
  Tensor<T> backward(const Tensor<T>& dy, BackwardOptions opts);
  std::vector<Param<T>*> params();
  std::vector<Param<T>*> buffers();
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// "same" padding split for a strided convolution mapping `big` to `small`.
struct SamePadding {
  int before;
  int after;
};
SamePadding same_padding(int big, int small, int kernel, int stride);

template <typename T>
void zero_grad(const std::vector<Param<T>*>& params);

template <typename T>
double grad_l2_norm(const std::vector<Param<T>*>& params);

}  // namespace tpgan::nn
