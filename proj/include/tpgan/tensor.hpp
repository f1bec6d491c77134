#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tpgan/error.hpp"

namespace tpgan {

/// Storage aligned to Eigen's widest packet. Vectorised reductions peel a
/// prefix that depends on the address, so equal alignment everywhere keeps
/// summation order, and with it every result, identical across runs.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense 4-D tensor in NHWC order. Row-vectors (features, logits) are stored
/// as n x 1 x 1 x c.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int h, int w, int c, T fill = T(0))
      : n_(n), h_(h), w_(w), c_(c), data_(static_cast<std::size_t>(n) * h * w * c, fill) {}

  static Tensor matrix(int rows, int cols, T fill = T(0)) { return Tensor(rows, 1, 1, cols, fill); }

  int n() const { return n_; }
  int h() const { return h_; }
  int w() const { return w_; }
  int c() const { return c_; }
  std::size_t size() const { return data_.size(); }
  /// Elements per batch row.
  std::size_t row_size() const { return static_cast<std::size_t>(h_) * w_ * c_; }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::span<T> row(int i) { return {data_.data() + i * row_size(), row_size()}; }
  std::span<const T> row(int i) const { return {data_.data() + i * row_size(), row_size()}; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(int b, int y, int x, int ch) { return data_[((static_cast<std::size_t>(b) * h_ + y) * w_ + x) * c_ + ch]; }
  const T& at(int b, int y, int x, int ch) const {
    return data_[((static_cast<std::size_t>(b) * h_ + y) * w_ + x) * c_ + ch];
  }

  bool same_shape(const Tensor& o) const { return n_ == o.n_ && h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }

  /// Relabels the shape; element count must be preserved.
  void reshape(int n, int h, int w, int c) {
    if (static_cast<std::size_t>(n) * h * w * c != data_.size()) {
      fail(Errc::ShapeMismatch, "reshape to " + shape_string(n, h, w, c) + " from " + shape_string());
    }
    n_ = n, h_ = h, w_ = w, c_ = c;
  }

  std::string shape_string() const { return shape_string(n_, h_, w_, c_); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n_, h_, w_, c_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Tensor& o) const = default;

 private:
  static std::string shape_string(int n, int h, int w, int c) {
    return "[" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
           std::to_string(c) + "]";
  }

  int n_ = 0, h_ = 0, w_ = 0, c_ = 0;
  AlignedVector<T> data_;
};

/// Stacks tensors along the batch axis.
template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.h() != b.h() || a.w() != b.w() || a.c() != b.c()) {
    fail(Errc::ShapeMismatch, "concat_batch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor<T> out(a.n() + b.n(), a.h(), a.w(), a.c());
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

/// Rows [begin, begin + count) along the batch axis.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& a, int begin, int count) {
  Tensor<T> out(count, a.h(), a.w(), a.c());
  auto first = a.values().begin() + static_cast<std::ptrdiff_t>(begin * a.row_size());
  std::copy(first, first + static_cast<std::ptrdiff_t>(out.size()), out.data());
  return out;
}

/// Appends per-row one-hot labels as constant image channels.
template <typename T>
Tensor<T> append_label_channels(const Tensor<T>& x, std::span<const int> labels, int num_classes) {
  if (static_cast<int>(labels.size()) != x.n()) {
    fail(Errc::ShapeMismatch, "label count " + std::to_string(labels.size()) + " vs batch " + std::to_string(x.n()));
  }
  const int c = x.c();
  Tensor<T> out(x.n(), x.h(), x.w(), c + num_classes);
  const std::size_t pixels = static_cast<std::size_t>(x.h()) * x.w();
  for (int b = 0; b < x.n(); ++b) {
    const T* src = x.data() + b * x.row_size();
    T* dst = out.data() + b * out.row_size();
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int ch = 0; ch < c; ++ch) dst[p * (c + num_classes) + ch] = src[p * c + ch];
      dst[p * (c + num_classes) + c + labels[b]] = T(1);
    }
  }
  return out;
}

/// Keeps the first `channels` channels of every pixel.
template <typename T>
Tensor<T> leading_channels(const Tensor<T>& x, int channels) {
  Tensor<T> out(x.n(), x.h(), x.w(), channels);
  const std::size_t pixels = static_cast<std::size_t>(x.n()) * x.h() * x.w();
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int ch = 0; ch < channels; ++ch) out[p * channels + ch] = x[p * x.c() + ch];
  }
  return out;
}

/// n x K one-hot matrix.
template <typename T>
Tensor<T> one_hot(std::span<const int> labels, int num_classes) {
  Tensor<T> out = Tensor<T>::matrix(static_cast<int>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      fail(Errc::InvalidArgument, "label " + std::to_string(labels[i]) + " outside [0," + std::to_string(num_classes) + ")");
    }
    out[i * num_classes + labels[i]] = T(1);
  }
  return out;
}

}  // namespace tpgan
