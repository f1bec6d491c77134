#include "tpgan/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numeric>

namespace tpgan::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct Geometry {
  int n, h, w, c;       // large grid
  int ho, wo;           // small grid
  int k, stride;
  int pad_top, pad_left;
};

// rows: (b, oy, ox) on the small grid; columns: (ky, kx, channel).
template <typename T>
void im2col(const T* x, const Geometry& g, T* cols) {
  const std::size_t row_len = static_cast<std::size_t>(g.k) * g.k * g.c;
  for (int b = 0; b < g.n; ++b) {
    for (int oy = 0; oy < g.ho; ++oy) {
      for (int ox = 0; ox < g.wo; ++ox) {
        T* dst = cols + ((static_cast<std::size_t>(b) * g.ho + oy) * g.wo + ox) * row_len;
        for (int ky = 0; ky < g.k; ++ky) {
          const int iy = oy * g.stride - g.pad_top + ky;
          for (int kx = 0; kx < g.k; ++kx) {
            const int ix = ox * g.stride - g.pad_left + kx;
            T* cell = dst + (static_cast<std::size_t>(ky) * g.k + kx) * g.c;
            if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) {
              std::fill(cell, cell + g.c, T(0));
            } else {
              const T* src = x + ((static_cast<std::size_t>(b) * g.h + iy) * g.w + ix) * g.c;
              std::copy(src, src + g.c, cell);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch rows back onto the large grid.
template <typename T>
void col2im(const T* cols, const Geometry& g, T* x) {
  const std::size_t row_len = static_cast<std::size_t>(g.k) * g.k * g.c;
  for (int b = 0; b < g.n; ++b) {
    for (int oy = 0; oy < g.ho; ++oy) {
      for (int ox = 0; ox < g.wo; ++ox) {
        const T* src = cols + ((static_cast<std::size_t>(b) * g.ho + oy) * g.wo + ox) * row_len;
        for (int ky = 0; ky < g.k; ++ky) {
          const int iy = oy * g.stride - g.pad_top + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (int kx = 0; kx < g.k; ++kx) {
            const int ix = ox * g.stride - g.pad_left + kx;
            if (ix < 0 || ix >= g.w) continue;
            const T* cell = src + (static_cast<std::size_t>(ky) * g.k + kx) * g.c;
            T* dst = x + ((static_cast<std::size_t>(b) * g.h + iy) * g.w + ix) * g.c;
            for (int ch = 0; ch < g.c; ++ch) dst[ch] += cell[ch];
          }
        }
      }
    }
  }
}

Geometry make_geometry(int n, int big_h, int big_w, int big_c, int small_h, int small_w, int k, int stride) {
  const SamePadding py = same_padding(big_h, small_h, k, stride);
  const SamePadding px = same_padding(big_w, small_w, k, stride);
  return Geometry{n, big_h, big_w, big_c, small_h, small_w, k, stride, py.before, px.before};
}

template <typename T>
void init_normal(Param<T>& p, double stddev, Rng& rng) {
  for (auto& v : p.value) v = static_cast<T>(stddev * rng.normal());
}

void require_even_batch(int n, const std::string& layer) {
  if (n % 2 != 0) fail(Errc::ShapeMismatch, layer + ": dual pass needs an even batch, got " + std::to_string(n));
}

}  // namespace

SamePadding same_padding(int big, int small, int kernel, int stride) {
  const int total = std::max((small - 1) * stride + kernel - big, 0);
  return {total / 2, total - total / 2};
}

template <typename T>
Param<T>::Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, [](std::size_t a, int d) { return a * d; });
  value.assign(count, T(0));
  grad.assign(count, T(0));
}

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::string name, int in, int out, double init_stddev, Rng& rng)
    : Layer<T>(name), in_(in), out_(out), kernel_(name + ".kernel", {in, out}), bias_(name + ".bias", {out}) {
  init_normal(kernel_, init_stddev, rng);
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Pass pass) {
  if (static_cast<int>(x.row_size()) != in_) {
    fail(Errc::ShapeMismatch, this->name() + ": expected " + std::to_string(in_) + " inputs, got " + x.shape_string());
  }
  if (pass.dual) require_even_batch(x.n(), this->name());
  input_ = x;
  primal_rows_ = pass.dual ? x.n() / 2 : x.n();
  Tensor<T> y = Tensor<T>::matrix(x.n(), out_);
  MatMap<T> ym(y.data(), x.n(), out_);
  ym.noalias() = ConstMatMap<T>(x.data(), x.n(), in_) * ConstMatMap<T>(kernel_.value.data(), in_, out_);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), out_);
  ym.topRows(primal_rows_).rowwise() += b;
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  const int n = input_.n();
  ConstMatMap<T> dym(dy.data(), n, out_);
  if (opts.param_grad) {
    MatMap<T>(kernel_.grad.data(), in_, out_).noalias() += ConstMatMap<T>(input_.data(), n, in_).transpose() * dym;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data(), out_) += dym.topRows(primal_rows_).colwise().sum();
  }
  if (!opts.input_grad) return {};
  Tensor<T> dx(n, input_.h(), input_.w(), input_.c());
  MatMap<T>(dx.data(), n, in_).noalias() = dym * ConstMatMap<T>(kernel_.value.data(), in_, out_).transpose();
  return dx;
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, double init_stddev,
                  Rng& rng)
    : Layer<T>(name),
      cin_(in_channels),
      cout_(out_channels),
      k_(kernel),
      stride_(stride),
      kernel_(name + ".kernel", {kernel, kernel, in_channels, out_channels}),
      bias_(name + ".bias", {out_channels}) {
  init_normal(kernel_, init_stddev, rng);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Pass pass) {
  if (x.c() != cin_) {
    fail(Errc::ShapeMismatch, this->name() + ": expected " + std::to_string(cin_) + " channels, got " + x.shape_string());
  }
  if (pass.dual) require_even_batch(x.n(), this->name());
  n_ = x.n(), h_ = x.h(), w_ = x.w();
  ho_ = (h_ + stride_ - 1) / stride_;
  wo_ = (w_ + stride_ - 1) / stride_;
  const Geometry g = make_geometry(n_, h_, w_, cin_, ho_, wo_, k_, stride_);
  const int rows = n_ * ho_ * wo_;
  const int patch = k_ * k_ * cin_;
  cols_.resize(static_cast<std::size_t>(rows) * patch);
  im2col(x.data(), g, cols_.data());
  primal_rows_ = pass.dual ? rows / 2 : rows;

  Tensor<T> y(n_, ho_, wo_, cout_);
  MatMap<T> ym(y.data(), rows, cout_);
  ym.noalias() = ConstMatMap<T>(cols_.data(), rows, patch) * ConstMatMap<T>(kernel_.value.data(), patch, cout_);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), cout_);
  ym.topRows(primal_rows_).rowwise() += b;
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  const int rows = n_ * ho_ * wo_;
  const int patch = k_ * k_ * cin_;
  ConstMatMap<T> dym(dy.data(), rows, cout_);
  if (opts.param_grad) {
    MatMap<T>(kernel_.grad.data(), patch, cout_).noalias() +=
        ConstMatMap<T>(cols_.data(), rows, patch).transpose() * dym;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data(), cout_) += dym.topRows(primal_rows_).colwise().sum();
  }
  if (!opts.input_grad) return {};
  AlignedVector<T> dcols(static_cast<std::size_t>(rows) * patch);
  MatMap<T>(dcols.data(), rows, patch).noalias() =
      dym * ConstMatMap<T>(kernel_.value.data(), patch, cout_).transpose();
  Tensor<T> dx(n_, h_, w_, cin_);
  col2im(dcols.data(), make_geometry(n_, h_, w_, cin_, ho_, wo_, k_, stride_), dx.data());
  return dx;
}

// ---------------------------------------------------------------- ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                                    double init_stddev, Rng& rng)
    : Layer<T>(name),
      cin_(in_channels),
      cout_(out_channels),
      k_(kernel),
      stride_(stride),
      kernel_(name + ".kernel", {kernel, kernel, out_channels, in_channels}),
      bias_(name + ".bias", {out_channels}) {
  init_normal(kernel_, init_stddev, rng);
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, Pass pass) {
  if (pass.dual) fail(Errc::InvalidArgument, this->name() + ": dual pass not supported");
  if (x.c() != cin_) {
    fail(Errc::ShapeMismatch, this->name() + ": expected " + std::to_string(cin_) + " channels, got " + x.shape_string());
  }
  input_ = x;
  const int n = x.n();
  const int h = x.h() * stride_, w = x.w() * stride_;
  const Geometry g = make_geometry(n, h, w, cout_, x.h(), x.w(), k_, stride_);
  const int rows = n * x.h() * x.w();
  const int patch = k_ * k_ * cout_;
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * patch);
  MatMap<T>(cols.data(), rows, patch).noalias() =
      ConstMatMap<T>(x.data(), rows, cin_) * ConstMatMap<T>(kernel_.value.data(), patch, cin_).transpose();
  Tensor<T> y(n, h, w, cout_);
  col2im(cols.data(), g, y.data());
  MatMap<T>(y.data(), n * h * w, cout_).rowwise() +=
      Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), cout_);
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  const int n = input_.n();
  const Geometry g = make_geometry(n, dy.h(), dy.w(), cout_, input_.h(), input_.w(), k_, stride_);
  const int rows = n * input_.h() * input_.w();
  const int patch = k_ * k_ * cout_;
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * patch);
  im2col(dy.data(), g, cols.data());
  ConstMatMap<T> colm(cols.data(), rows, patch);
  if (opts.param_grad) {
    MatMap<T>(kernel_.grad.data(), patch, cin_).noalias() +=
        colm.transpose() * ConstMatMap<T>(input_.data(), rows, cin_);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data(), cout_) +=
        ConstMatMap<T>(dy.data(), n * dy.h() * dy.w(), cout_).colwise().sum();
  }
  if (!opts.input_grad) return {};
  Tensor<T> dx(n, input_.h(), input_.w(), cin_);
  MatMap<T>(dx.data(), rows, cin_).noalias() = colm * ConstMatMap<T>(kernel_.value.data(), patch, cin_);
  return dx;
}

// ---------------------------------------------------------------- LeakyRelu

// Written with min/max and arithmetic on the mask: both a plain loop and
// Eigen's select() compile to a branch per element, which mispredicts on the
// near-random signs of activations.
template <typename T>
Tensor<T> LeakyRelu<T>::forward(const Tensor<T>& x, Pass pass) {
  dual_ = pass.dual;
  if (dual_) require_even_batch(x.n(), this->name());
  const Eigen::Index half = static_cast<Eigen::Index>(dual_ ? x.size() / 2 : x.size());
  positive_.resize(static_cast<std::size_t>(half));
  Tensor<T> y(x.n(), x.h(), x.w(), x.c());
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Eigen::Map<const Arr> xp(x.data(), half);
  Eigen::Map<Arr> yp(y.data(), half);
  Eigen::Map<Eigen::Array<unsigned char, Eigen::Dynamic, 1>> mask(positive_.data(), half);
  const T slope = slope_;
  yp = xp.max(T(0)) + slope * xp.min(T(0));
  mask = (xp >= T(0)).template cast<unsigned char>();
  if (dual_) {
    const Arr scale = slope + (T(1) - slope) * mask.template cast<T>();
    Eigen::Map<Arr>(y.data() + half, half) = Eigen::Map<const Arr>(x.data() + half, half) * scale;
  }
  return y;
}

template <typename T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  if (!opts.input_grad) return {};
  Tensor<T> dx(dy.n(), dy.h(), dy.w(), dy.c());
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const Eigen::Index half = static_cast<Eigen::Index>(positive_.size());
  Eigen::Map<const Eigen::Array<unsigned char, Eigen::Dynamic, 1>> mask(positive_.data(), half);
  const T slope = slope_;
  const Arr scale = slope + (T(1) - slope) * mask.template cast<T>();
  Eigen::Map<Arr>(dx.data(), half) = Eigen::Map<const Arr>(dy.data(), half) * scale;
  if (dual_) Eigen::Map<Arr>(dx.data() + half, half) = Eigen::Map<const Arr>(dy.data() + half, half) * scale;
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, int channels, bool affine, double epsilon)
    : Layer<T>(name),
      channels_(channels),
      affine_(affine),
      epsilon_(epsilon),
      gamma_(name + ".gamma", {channels}),
      beta_(name + ".beta", {channels}),
      moving_mean_(name + ".moving_mean", {channels}),
      moving_var_(name + ".moving_variance", {channels}) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  std::fill(moving_var_.value.begin(), moving_var_.value.end(), T(1));
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Pass pass) {
  if (pass.dual) fail(Errc::InvalidArgument, this->name() + ": dual pass not supported");
  if (x.c() != channels_) fail(Errc::ShapeMismatch, this->name() + ": channel mismatch " + x.shape_string());
  phase_ = pass.phase;
  const std::size_t m = x.size() / channels_;
  const int c = channels_;
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  if (phase_ == Phase::Train) {
    for (std::size_t p = 0; p < m; ++p)
      for (int ch = 0; ch < c; ++ch) mean[ch] += x[p * c + ch];
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t p = 0; p < m; ++p)
      for (int ch = 0; ch < c; ++ch) {
        const double d = x[p * c + ch] - mean[ch];
        var[ch] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(m);
    for (int ch = 0; ch < c; ++ch) {
      moving_mean_.value[ch] = static_cast<T>(kMomentum * moving_mean_.value[ch] + (1.0 - kMomentum) * mean[ch]);
      moving_var_.value[ch] = static_cast<T>(kMomentum * moving_var_.value[ch] + (1.0 - kMomentum) * var[ch]);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = moving_mean_.value[ch];
      var[ch] = moving_var_.value[ch];
    }
  }
  inv_std_.resize(c);
  for (int ch = 0; ch < c; ++ch) inv_std_[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + epsilon_));
  normalized_ = Tensor<T>(x.n(), x.h(), x.w(), c);
  Tensor<T> y(x.n(), x.h(), x.w(), c);
  for (std::size_t p = 0; p < m; ++p) {
    for (int ch = 0; ch < c; ++ch) {
      const T xh = (x[p * c + ch] - static_cast<T>(mean[ch])) * inv_std_[ch];
      normalized_[p * c + ch] = xh;
      y[p * c + ch] = gamma_.value[ch] * xh + beta_.value[ch];
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  const int c = channels_;
  const std::size_t m = dy.size() / c;
  std::vector<T> sum_dy(c, T(0)), sum_dy_xh(c, T(0));
  for (std::size_t p = 0; p < m; ++p) {
    for (int ch = 0; ch < c; ++ch) {
      sum_dy[ch] += dy[p * c + ch];
      sum_dy_xh[ch] += dy[p * c + ch] * normalized_[p * c + ch];
    }
  }
  if (opts.param_grad && affine_) {
    for (int ch = 0; ch < c; ++ch) {
      gamma_.grad[ch] += sum_dy_xh[ch];
      beta_.grad[ch] += sum_dy[ch];
    }
  }
  if (!opts.input_grad) return {};
  Tensor<T> dx(dy.n(), dy.h(), dy.w(), c);
  if (phase_ == Phase::Inference) {
    for (std::size_t p = 0; p < m; ++p)
      for (int ch = 0; ch < c; ++ch) dx[p * c + ch] = dy[p * c + ch] * gamma_.value[ch] * inv_std_[ch];
    return dx;
  }
  const T inv_m = T(1) / static_cast<T>(m);
  for (std::size_t p = 0; p < m; ++p) {
    for (int ch = 0; ch < c; ++ch) {
      const T g = gamma_.value[ch] * inv_std_[ch];
      dx[p * c + ch] = g * (dy[p * c + ch] - inv_m * sum_dy[ch] - normalized_[p * c + ch] * inv_m * sum_dy_xh[ch]);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Tanh

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x, Pass pass) {
  if (pass.dual) fail(Errc::InvalidArgument, this->name() + ": dual pass not supported");
  const T limit = std::nextafter(T(1), T(0));
  output_ = x;
  for (auto& v : output_.values()) v = std::clamp(std::tanh(v), -limit, limit);
  return output_;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  if (!opts.input_grad) return {};
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= T(1) - output_[i] * output_[i];
  return dx;
}

// ---------------------------------------------------------------- Reshape

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x, Pass) {
  in_h_ = x.h(), in_w_ = x.w(), in_c_ = x.c();
  Tensor<T> y = x;
  y.reshape(x.n(), h_, w_, c_);
  return y;
}

template <typename T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  if (!opts.input_grad) return {};
  Tensor<T> dx = dy;
  dx.reshape(dy.n(), in_h_, in_w_, in_c_);
  return dx;
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Pass pass) {
  Tensor<T> h = x;
  for (auto& l : layers_) h = l->forward(h, pass);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dy, BackwardOptions opts) {
  Tensor<T> g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    BackwardOptions o = opts;
    if (i > 0) o.input_grad = true;
    g = layers_[i]->backward(g, o);
  }
  return g;
}

template <typename T>
std::vector<Param<T>*> Sequential<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<Param<T>*> Sequential<T>::buffers() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->buffers()) out.push_back(p);
  return out;
}

template <typename T>
void zero_grad(const std::vector<Param<T>*>& params) {
  for (auto* p : params) std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <typename T>
double grad_l2_norm(const std::vector<Param<T>*>& params) {
  double sum = 0.0;
  for (const auto* p : params)
    for (T g : p->grad) sum += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(sum);
}

#define TPGAN_INSTANTIATE(T)                                          \
  template struct Param<T>;                                           \
  template class Dense<T>;                                            \
  template class Conv2d<T>;                                           \
  template class ConvTranspose2d<T>;                                  \
  template class LeakyRelu<T>;                                        \
  template class BatchNorm<T>;                                        \
  template class Tanh<T>;                                             \
  template class Reshape<T>;                                          \
  template class Sequential<T>;                                       \
  template void zero_grad<T>(const std::vector<Param<T>*>&);          \
  template double grad_l2_norm<T>(const std::vector<Param<T>*>&);

TPGAN_INSTANTIATE(float)
TPGAN_INSTANTIATE(double)
#undef TPGAN_INSTANTIATE

}  // namespace tpgan::nn
