#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "s2wat/rng.hpp"
#include "s2wat/tensor.hpp"

namespace s2wat {

/// Ordered map from hierarchical dotted names to trainable tensors.
/// Iteration order is insertion order, which fixes checkpoint layout and
/// optimizer state indexing.
template <class T>
class ParameterStoreT {
 public:
  TensorT<T>& add(const std::string& name, TensorT<T> t) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    t.set_requires_grad(true);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  TensorT<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second].second;
  }
  const TensorT<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second].second;
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  std::vector<std::pair<std::string, TensorT<T>>>& items() { return items_; }
  const std::vector<std::pair<std::string, TensorT<T>>>& items() const { return items_; }

  void zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
  }

 private:
  std::vector<std::pair<std::string, TensorT<T>>> items_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// initializers
// ---------------------------------------------------------------------------

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), the usual fan-in scaling for
/// linear/conv weights and biases.
template <class T>
TensorT<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  auto t = TensorT<T>::zeros(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

/// Normal(0, std) truncated to two standard deviations.
template <class T>
TensorT<T> trunc_normal(Shape shape, double std_dev, Rng& rng) {
  auto t = TensorT<T>::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(rng.trunc_normal(std_dev));
  return t;
}

/// He-normal N(0, sqrt(2/fan_in)) for conv stacks.
template <class T>
TensorT<T> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  auto t = TensorT<T>::zeros(std::move(shape));
  double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(rng.normal() * std_dev);
  return t;
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

/// Bias-corrected Adam. Moment state is kept per store slot and initialized
/// lazily to zeros; parameters without an accumulated gradient are treated
/// as having zero gradient.
template <class T>
class AdamT {
 public:
  explicit AdamT(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterStoreT<T>& params, double lr) {
    if (m_.size() != params.size()) {
      m_.resize(params.size());
      v_.resize(params.size());
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      TensorT<T>& p = params.items()[pi].second;
      auto& m = m_[pi];
      auto& v = v_[pi];
      if (m.size() != p.size()) {
        m.assign(p.size(), 0.0);
        v.assign(p.size(), 0.0);
      }
      const T* g = p.has_grad() ? p.grad() : nullptr;
      for (std::size_t i = 0; i < p.size(); ++i) {
        double gi = g ? static_cast<double>(g[i]) : 0.0;
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        p.data()[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::uint64_t step_count() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace s2wat
