#include "tpgan/nn/optimizer.hpp"

#include <cmath>

namespace tpgan::nn {

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->size(), T(0));
      v_.emplace_back(p->size(), T(0));
    }
  }
  if (m_.size() != params.size()) fail(Errc::ShapeMismatch, "optimizer bound to a different parameter list");
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double lr_t = config_.learning_rate * std::sqrt(1.0 - std::pow(b2, static_cast<double>(steps_))) /
                      (1.0 - std::pow(b1, static_cast<double>(steps_)));
  const T eps_hat = static_cast<T>(config_.epsilon * std::sqrt(1.0 - std::pow(b2, static_cast<double>(steps_))));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != p.size()) fail(Errc::ShapeMismatch, "optimizer moment size mismatch for " + p.name);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T g = p.grad[j];
      m[j] = static_cast<T>(b1) * m[j] + static_cast<T>(1.0 - b1) * g;
      v[j] = static_cast<T>(b2) * v[j] + static_cast<T>(1.0 - b2) * g * g;
      p.value[j] -= static_cast<T>(lr_t) * m[j] / (std::sqrt(v[j]) + eps_hat);
    }
  }
}

template <typename T>
std::vector<Param<T>> Adam<T>::export_state(const std::vector<Param<T>*>& params) const {
  std::vector<Param<T>> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T> m(params[i]->name + ".m", params[i]->shape);
    Param<T> v(params[i]->name + ".v", params[i]->shape);
    if (i < m_.size()) {
      m.value = m_[i];
      v.value = v_[i];
    }
    out.push_back(std::move(m));
    out.push_back(std::move(v));
  }
  return out;
}

template <typename T>
void Adam<T>::import_state(const std::vector<Param<T>*>& params, const std::vector<Param<T>>& state,
                           std::int64_t steps) {
  if (state.size() != 2 * params.size()) fail(Errc::CorruptCheckpoint, "optimizer state size mismatch");
  m_.clear();
  v_.clear();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state[2 * i].value.size() != params[i]->size() || state[2 * i + 1].value.size() != params[i]->size()) {
      fail(Errc::CorruptCheckpoint, "optimizer moment shape mismatch for " + params[i]->name);
    }
    m_.push_back(state[2 * i].value);
    v_.push_back(state[2 * i + 1].value);
  }
  steps_ = steps;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace tpgan::nn
