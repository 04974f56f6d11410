#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "s2wat/common.hpp"

namespace s2wat {

namespace detail {

template <class T>
struct TensorDataT {
  Shape shape;
  std::vector<T> v;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until first accumulation

  void ensure_grad() {
    if (grad.size() != v.size()) grad.assign(v.size(), T(0));
  }
};

}  // namespace detail

/// Dense n-dimensional array with value semantics over a shared payload.
/// Copying a tensor aliases its storage; ops always allocate fresh outputs,
/// so payloads behave as immutable once produced. The optimizer and the
/// finite-difference harness mutate data() in place deliberately.
template <class T>
class TensorT {
 public:
  using Data = detail::TensorDataT<T>;

  TensorT() = default;

  static TensorT zeros(Shape shape) {
    TensorT t;
    std::size_t n = numel(shape);
    t.d_ = std::make_shared<Data>();
    t.d_->shape = std::move(shape);
    t.d_->v.assign(n, T(0));
    return t;
  }

  static TensorT full(Shape shape, T value) {
    TensorT t = zeros(std::move(shape));
    for (T& x : t.d_->v) x = value;
    return t;
  }

  static TensorT from(Shape shape, std::vector<T> values) {
    if (numel(shape) != values.size())
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    TensorT t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = std::move(shape);
    t.d_->v = std::move(values);
    return t;
  }

  static TensorT scalar(T value) { return from({1}, {value}); }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  std::size_t rank() const { return d_->shape.size(); }
  std::size_t dim(std::size_t i) const { return d_->shape[i]; }
  std::size_t size() const { return d_->v.size(); }

  T* data() { return d_->v.data(); }
  const T* data() const { return d_->v.data(); }
  std::vector<T>& vec() { return d_->v; }
  const std::vector<T>& vec() const { return d_->v; }

  T item() const {
    if (size() != 1) throw ShapeError("item() requires a scalar tensor, got " + shape_str(shape()));
    return d_->v[0];
  }

  bool requires_grad() const { return d_ && d_->requires_grad; }
  TensorT& set_requires_grad(bool b) {
    d_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return d_ && d_->grad.size() == d_->v.size(); }
  T* grad() { return d_->grad.data(); }
  const T* grad() const { return d_->grad.data(); }
  std::vector<T>& grad_vec() { return d_->grad; }
  void ensure_grad() { d_->ensure_grad(); }
  void zero_grad() {
    if (d_) d_->grad.clear();
  }

  /// Deep copy detached from any gradient bookkeeping.
  TensorT value_copy() const {
    TensorT t;
    t.d_ = std::make_shared<Data>();
    t.d_->shape = d_->shape;
    t.d_->v = d_->v;
    return t;
  }

  bool all_finite() const {
    for (T x : d_->v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  std::shared_ptr<Data> ptr() const { return d_; }

 private:
  std::shared_ptr<Data> d_;
};

/// Ordered record of differentiable ops. Nodes are appended in execution
/// order, which is a topological order of the value graph by construction.
template <class T>
class TapeT {
 public:
  void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Populates grads of every requires_grad tensor reachable from `loss`.
  /// Grads accumulate; callers zero them between steps.
  void backward(TensorT<T>& loss) {
    if (loss.size() != 1)
      throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    loss.ensure_grad();
    loss.grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

namespace detail {
template <class T>
inline TapeT<T>*& active_tape() {
  thread_local TapeT<T>* current = nullptr;
  return current;
}
}  // namespace detail

/// RAII scope: while alive, ops on this thread record onto `tape`.
template <class T>
class TapeScopeT {
 public:
  explicit TapeScopeT(TapeT<T>& tape) : prev_(detail::active_tape<T>()) {
    detail::active_tape<T>() = &tape;
  }
  ~TapeScopeT() { detail::active_tape<T>() = prev_; }
  TapeScopeT(const TapeScopeT&) = delete;
  TapeScopeT& operator=(const TapeScopeT&) = delete;

 private:
  TapeT<T>* prev_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;
using Tape = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace s2wat
