#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

#include "s2wat/flops.hpp"
#include "s2wat/tensor.hpp"

namespace s2wat {

namespace detail {

template <class T>
bool grad_ready(const std::shared_ptr<TensorDataT<T>>& t) {
  return t->grad.size() == t->v.size();
}

// c[m,p] += a[m,k] * b[k,p]
template <class T>
void mm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * p;
    for (std::size_t l = 0; l < k; ++l) {
      T av = arow[l];
      if (av == T(0)) continue;
      const T* brow = b + l * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,k] += g[m,p] * b^T  (b is [k,p])
template <class T>
void mm_acc_gbt(const T* g, const T* b, T* c, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * p;
    T* crow = c + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const T* brow = b + l * p;
      T acc = T(0);
      for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
      crow[l] += acc;
    }
  }
}

// c[k,p] += a^T * g  (a is [m,k], g is [m,p])
template <class T>
void mm_acc_atg(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* grow = g + i * p;
    for (std::size_t l = 0; l < k; ++l) {
      T av = arow[l];
      if (av == T(0)) continue;
      T* crow = c + l * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * grow[j];
    }
  }
}

enum class Bc { Same, LastOne, Scalar };

template <class T>
Bc bc_mode(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() == b.shape()) return Bc::Same;
  if (b.rank() == 1 && b.size() == 1) return Bc::Scalar;
  if (b.rank() == a.rank() && b.dim(b.rank() - 1) == 1) {
    bool ok = true;
    for (std::size_t i = 0; i + 1 < a.rank(); ++i) ok = ok && a.dim(i) == b.dim(i);
    if (ok) return Bc::LastOne;
  }
  throw ShapeError("operands not broadcastable: " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul and layout ops
// ---------------------------------------------------------------------------

/// Batched matrix product a[..., m, k] x b[..., k, p] -> [..., m, p].
/// b may be rank 2, in which case it is shared across the batch; otherwise
/// batch extents must match exactly. Adds batch*m*k*p to an active counter.
template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError("matmul requires rank >= 2, got " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  std::size_t m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
  std::size_t kb = b.dim(b.rank() - 2), p = b.dim(b.rank() - 1);
  if (k != kb)
    throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  bool shared_b = b.rank() == 2;
  if (!shared_b) {
    if (b.rank() != a.rank())
      throw ShapeError("matmul batch ranks differ: " + shape_str(a.shape()) + " x " +
                       shape_str(b.shape()));
    for (std::size_t i = 0; i + 2 < a.rank(); ++i)
      if (a.dim(i) != b.dim(i))
        throw ShapeError("matmul batch extents differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(p);
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < a.rank(); ++i) batch *= a.dim(i);

  auto out = TensorT<T>::zeros(out_shape);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const T* ap = a.data() + bi * m * k;
    const T* bp = b.data() + (shared_b ? 0 : bi * k * p);
    detail::mm_acc(ap, bp, out.data() + bi * m * p, m, k, p);
  }
  count_mults(static_cast<std::uint64_t>(batch) * m * k * p);

  auto* tape = detail::active_tape<T>();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto ad = a.ptr(), bd = b.ptr(), od = out.ptr();
    tape->record([ad, bd, od, m, k, p, batch, shared_b]() {
      if (!detail::grad_ready(od)) return;
      if (ad->requires_grad) {
        ad->ensure_grad();
        for (std::size_t bi = 0; bi < batch; ++bi)
          detail::mm_acc_gbt(od->grad.data() + bi * m * p,
                             bd->v.data() + (shared_b ? 0 : bi * k * p),
                             ad->grad.data() + bi * m * k, m, k, p);
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        for (std::size_t bi = 0; bi < batch; ++bi)
          detail::mm_acc_atg(ad->v.data() + bi * m * k, od->grad.data() + bi * m * p,
                             bd->grad.data() + (shared_b ? 0 : bi * k * p), m, k, p);
      }
    });
  }
  return out;
}

/// Swap the last two extents: [..., r, c] -> [..., c, r].
template <class T>
TensorT<T> transpose_last2(const TensorT<T>& x) {
  if (x.rank() < 2) throw ShapeError("transpose_last2 requires rank >= 2");
  std::size_t r = x.dim(x.rank() - 2), c = x.dim(x.rank() - 1);
  Shape out_shape = x.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  std::size_t batch = x.size() / (r * c);
  auto out = TensorT<T>::zeros(out_shape);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const T* xp = x.data() + bi * r * c;
    T* op = out.data() + bi * r * c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) op[j * r + i] = xp[i * c + j];
  }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, r, c, batch]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* gp = od->grad.data() + bi * r * c;
        T* xg = xd->grad.data() + bi * r * c;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) xg[i * c + j] += gp[j * r + i];
      }
    });
  }
  return out;
}

/// Same data, new extents. Copies; the engine has no aliased views.
template <class T>
TensorT<T> reshape(const TensorT<T>& x, Shape new_shape) {
  if (numel(new_shape) != x.size())
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                     " changes element count");
  auto out = TensorT<T>::from(std::move(new_shape), x.vec());
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < xd->v.size(); ++i) xd->grad[i] += od->grad[i];
    });
  }
  return out;
}

/// x[..., start:start+len] over the last extent.
template <class T>
TensorT<T> slice_lastdim(const TensorT<T>& x, std::size_t start, std::size_t len) {
  std::size_t n = x.dim(x.rank() - 1);
  if (start + len > n) throw ShapeError("slice_lastdim out of range");
  Shape out_shape = x.shape();
  out_shape.back() = len;
  std::size_t rows = x.size() / n;
  auto out = TensorT<T>::zeros(out_shape);
  for (std::size_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * len, x.data() + r * n + start, len * sizeof(T));
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, start, len, n, rows]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < len; ++i)
          xd->grad[r * n + start + i] += od->grad[r * len + i];
    });
  }
  return out;
}

/// Concatenate along `axis`; all other extents must agree.
template <class T>
TensorT<T> concat(const std::vector<TensorT<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat axis out of range");
  std::size_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != s0.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t i = 0; i < s0.size(); ++i)
      if (i != axis && p.dim(i) != s0[i]) throw ShapeError("concat extent mismatch");
    axis_total += p.dim(axis);
  }
  Shape out_shape = s0;
  out_shape[axis] = axis_total;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];

  auto out = TensorT<T>::zeros(out_shape);
  std::size_t out_stride = axis_total * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      std::size_t chunk = p.dim(axis) * inner;
      std::memcpy(out.data() + o * out_stride + offset, p.data() + o * chunk, chunk * sizeof(T));
      offset += chunk;
    }
  }
  auto* tape = detail::active_tape<T>();
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<detail::TensorDataT<T>>> pd;
    std::vector<std::size_t> chunks;
    for (const auto& p : parts) {
      pd.push_back(p.ptr());
      chunks.push_back(p.dim(axis) * inner);
    }
    auto od = out.ptr();
    tape->record([pd, chunks, od, outer, out_stride]() {
      if (!detail::grad_ready(od)) return;
      for (std::size_t o = 0; o < outer; ++o) {
        std::size_t offset = 0;
        for (std::size_t pi = 0; pi < pd.size(); ++pi) {
          if (pd[pi]->requires_grad) {
            pd[pi]->ensure_grad();
            for (std::size_t i = 0; i < chunks[pi]; ++i)
              pd[pi]->grad[o * chunks[pi] + i] += od->grad[o * out_stride + offset + i];
          }
          offset += chunks[pi];
        }
      }
    });
  }
  return out;
}

/// Row gather: x viewed as [rows, C] with C = last extent; out row r copies
/// x row map[r]. Duplicated sources are fine, the backward accumulates.
template <class T>
TensorT<T> gather_rows(const TensorT<T>& x, Shape out_shape,
                       std::shared_ptr<const std::vector<std::size_t>> map) {
  std::size_t c = x.dim(x.rank() - 1);
  if (out_shape.empty() || out_shape.back() != c)
    throw ShapeError("gather_rows output last extent must be " + std::to_string(c));
  std::size_t out_rows = numel(out_shape) / c;
  std::size_t in_rows = x.size() / c;
  if (map->size() != out_rows) throw ShapeError("gather_rows map size mismatch");
  auto out = TensorT<T>::zeros(std::move(out_shape));
  for (std::size_t r = 0; r < out_rows; ++r) {
    std::size_t src = (*map)[r];
    if (src >= in_rows) throw ShapeError("gather_rows map index out of range");
    std::memcpy(out.data() + r * c, x.data() + src * c, c * sizeof(T));
  }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, map, c, out_rows]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t r = 0; r < out_rows; ++r) {
        std::size_t src = (*map)[r];
        for (std::size_t i = 0; i < c; ++i) xd->grad[src * c + i] += od->grad[r * c + i];
      }
    });
  }
  return out;
}

/// Elementwise gather: out flat index i copies x flat index map[i].
template <class T>
TensorT<T> gather_elems(const TensorT<T>& x, Shape out_shape,
                        std::shared_ptr<const std::vector<std::size_t>> map) {
  std::size_t n = numel(out_shape);
  if (map->size() != n) throw ShapeError("gather_elems map size mismatch");
  auto out = TensorT<T>::zeros(std::move(out_shape));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t src = (*map)[i];
    if (src >= x.size()) throw ShapeError("gather_elems map index out of range");
    out.data()[i] = x.data()[src];
  }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, map, n]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) xd->grad[(*map)[i]] += od->grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// elementwise arithmetic (limited broadcast: same shape, trailing 1, scalar)
// ---------------------------------------------------------------------------

namespace detail {

template <class T, class Fwd, class DA, class DB>
TensorT<T> binary_op(const TensorT<T>& a, const TensorT<T>& b, Fwd fwd, DA da_of, DB db_of) {
  Bc mode = bc_mode(a, b);
  std::size_t n = a.size();
  std::size_t last = a.rank() ? a.dim(a.rank() - 1) : 1;
  auto out = TensorT<T>::zeros(a.shape());
  const T* ap = a.data();
  const T* bp = b.data();
  T* op = out.data();
  auto bidx = [&](std::size_t i) -> std::size_t {
    switch (mode) {
      case Bc::Same: return i;
      case Bc::LastOne: return i / last;
      default: return 0;
    }
  };
  for (std::size_t i = 0; i < n; ++i) op[i] = fwd(ap[i], bp[bidx(i)]);

  auto* tape = active_tape<T>();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto ad = a.ptr(), bd = b.ptr(), od = out.ptr();
    tape->record([ad, bd, od, mode, n, last, da_of, db_of]() {
      if (!grad_ready(od)) return;
      auto bi = [&](std::size_t i) -> std::size_t {
        switch (mode) {
          case Bc::Same: return i;
          case Bc::LastOne: return i / last;
          default: return 0;
        }
      };
      if (ad->requires_grad) {
        ad->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          ad->grad[i] += od->grad[i] * da_of(ad->v[i], bd->v[bi(i)]);
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          bd->grad[bi(i)] += od->grad[i] * db_of(ad->v[i], bd->v[bi(i)]);
      }
    });
  }
  return out;
}

}  // namespace detail

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_op(
      a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_op(
      a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_op(
      a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <class T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::binary_op(
      a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <class T>
TensorT<T> scalar_mul(const TensorT<T>& x, T c) {
  auto out = TensorT<T>::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * c;
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, c]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < xd->v.size(); ++i) xd->grad[i] += od->grad[i] * c;
    });
  }
  return out;
}

/// x + bias with bias broadcast over every leading extent; bias is rank 1
/// matching the last extent of x.
template <class T>
TensorT<T> add_bias(const TensorT<T>& x, const TensorT<T>& bias) {
  std::size_t n = x.dim(x.rank() - 1);
  if (bias.rank() != 1 || bias.dim(0) != n)
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match last extent " +
                     std::to_string(n));
  std::size_t rows = x.size() / n;
  auto out = TensorT<T>::zeros(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) out.data()[r * n + i] = x.data()[r * n + i] + bias.data()[i];
  auto* tape = detail::active_tape<T>();
  if (tape && (x.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    auto xd = x.ptr(), bd = bias.ptr(), od = out.ptr();
    tape->record([xd, bd, od, rows, n]() {
      if (!detail::grad_ready(od)) return;
      if (xd->requires_grad) {
        xd->ensure_grad();
        for (std::size_t i = 0; i < xd->v.size(); ++i) xd->grad[i] += od->grad[i];
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t i = 0; i < n; ++i) bd->grad[i] += od->grad[r * n + i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> sum_all(const TensorT<T>& x) {
  T acc = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  auto out = TensorT<T>::scalar(acc);
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      T g = od->grad[0];
      for (std::size_t i = 0; i < xd->v.size(); ++i) xd->grad[i] += g;
    });
  }
  return out;
}

/// Mean over the last extent, kept as an extent of 1.
template <class T>
TensorT<T> mean_lastdim(const TensorT<T>& x) {
  std::size_t n = x.dim(x.rank() - 1);
  if (n == 0) throw ShapeError("mean_lastdim over empty extent");
  std::size_t rows = x.size() / n;
  Shape out_shape = x.shape();
  out_shape.back() = 1;
  auto out = TensorT<T>::zeros(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x.data()[r * n + i];
    out.data()[r] = acc / static_cast<T>(n);
  }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, rows, n]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        T g = od->grad[r] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) xd->grad[r * n + i] += g;
      }
    });
  }
  return out;
}

/// Mean of all elements, as a scalar.
template <class T>
TensorT<T> mean_all(const TensorT<T>& x) {
  return scalar_mul(sum_all(x), T(1) / static_cast<T>(x.size()));
}

// ---------------------------------------------------------------------------
// nonlinearities and normalization
// ---------------------------------------------------------------------------

/// Softmax over the last extent, computed with max subtraction.
template <class T>
TensorT<T> softmax_lastdim(const TensorT<T>& x) {
  std::size_t n = x.dim(x.rank() - 1);
  if (n == 0) throw ShapeError("softmax over empty extent");
  std::size_t rows = x.size() / n;
  auto out = TensorT<T>::zeros(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * n;
    T* or_ = out.data() + r * n;
    T mx = xr[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
    T denom = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      or_[i] = std::exp(xr[i] - mx);
      denom += or_[i];
    }
    for (std::size_t i = 0; i < n; ++i) or_[i] /= denom;
  }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, rows, n]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      // dx_i = y_i * (g_i - sum_j g_j y_j)
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = od->v.data() + r * n;
        const T* g = od->grad.data() + r * n;
        T dot = T(0);
        for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < n; ++i) xd->grad[r * n + i] += y[i] * (g[i] - dot);
      }
    });
  }
  return out;
}

/// Layer normalization over the last extent with affine gamma/beta.
/// Uses the population variance of each token.
template <class T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      T eps = T(1e-5)) {
  std::size_t n = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != n || beta.rank() != 1 || beta.dim(0) != n)
    throw ShapeError("layer_norm affine extents must equal the channel extent " +
                     std::to_string(n));
  std::size_t rows = x.size() / n;
  auto out = TensorT<T>::zeros(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * n;
    T* or_ = out.data() + r * n;
    T mu = T(0);
    for (std::size_t i = 0; i < n; ++i) mu += xr[i];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<T>(n);
    T inv = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i)
      or_[i] = gamma.data()[i] * ((xr[i] - mu) * inv) + beta.data()[i];
  }
  auto* tape = detail::active_tape<T>();
  if (tape && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
    out.set_requires_grad(true);
    auto xd = x.ptr(), gd = gamma.ptr(), bd = beta.ptr(), od = out.ptr();
    tape->record([xd, gd, bd, od, rows, n, eps]() {
      if (!detail::grad_ready(od)) return;
      std::vector<T> xhat(n);
      if (xd->requires_grad) xd->ensure_grad();
      if (gd->requires_grad) gd->ensure_grad();
      if (bd->requires_grad) bd->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = xd->v.data() + r * n;
        const T* g = od->grad.data() + r * n;
        T mu = T(0);
        for (std::size_t i = 0; i < n; ++i) mu += xr[i];
        mu /= static_cast<T>(n);
        T var = T(0);
        for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= static_cast<T>(n);
        T inv = T(1) / std::sqrt(var + eps);
        for (std::size_t i = 0; i < n; ++i) xhat[i] = (xr[i] - mu) * inv;
        if (gd->requires_grad)
          for (std::size_t i = 0; i < n; ++i) gd->grad[i] += g[i] * xhat[i];
        if (bd->requires_grad)
          for (std::size_t i = 0; i < n; ++i) bd->grad[i] += g[i];
        if (xd->requires_grad) {
          T m1 = T(0), m2 = T(0);
          for (std::size_t i = 0; i < n; ++i) {
            T dxhat = g[i] * gd->v[i];
            m1 += dxhat;
            m2 += dxhat * xhat[i];
          }
          m1 /= static_cast<T>(n);
          m2 /= static_cast<T>(n);
          for (std::size_t i = 0; i < n; ++i) {
            T dxhat = g[i] * gd->v[i];
            xd->grad[r * n + i] += inv * (dxhat - m1 - xhat[i] * m2);
          }
        }
      }
    });
  }
  return out;
}

// tanh-approximation constants, stated for reproducibility:
// gelu(x) = 0.5 x (1 + tanh(0.7978845608 (x + 0.044715 x^3)))
inline constexpr double kGeluC = 0.7978845608028654;
inline constexpr double kGeluA = 0.044715;

template <class T>
TensorT<T> gelu(const TensorT<T>& x) {
  auto out = TensorT<T>::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    T v = x.data()[i];
    T u = static_cast<T>(kGeluC) * (v + static_cast<T>(kGeluA) * v * v * v);
    out.data()[i] = T(0.5) * v * (T(1) + std::tanh(u));
  }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < xd->v.size(); ++i) {
        T v = xd->v[i];
        T u = static_cast<T>(kGeluC) * (v + static_cast<T>(kGeluA) * v * v * v);
        T th = std::tanh(u);
        T du = static_cast<T>(kGeluC) * (T(1) + T(3) * static_cast<T>(kGeluA) * v * v);
        T d = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
        xd->grad[i] += od->grad[i] * d;
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
  auto out = TensorT<T>::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < xd->v.size(); ++i)
        if (xd->v[i] > T(0)) xd->grad[i] += od->grad[i];
    });
  }
  return out;
}

template <class T>
TensorT<T> sqrt_elem(const TensorT<T>& x) {
  auto out = TensorT<T>::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.data()[i] < T(0)) throw NumericError("sqrt_elem of negative value");
    out.data()[i] = std::sqrt(x.data()[i]);
  }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < xd->v.size(); ++i)
        if (od->v[i] > T(0)) xd->grad[i] += od->grad[i] * T(0.5) / od->v[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// spatial ops on channel-first [C, H, W] maps
// ---------------------------------------------------------------------------

/// Valid 3x3 cross-correlation, stride 1; callers reflect-pad beforehand.
/// Adds Cout*Cin*9*Hout*Wout to an active counter.
template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (x.rank() != 3 || w.rank() != 4) throw ShapeError("conv2d expects x [C,H,W], w [Co,Ci,3,3]");
  std::size_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  std::size_t co = w.dim(0);
  if (w.dim(1) != ci || w.dim(2) != 3 || w.dim(3) != 3)
    throw ShapeError("conv2d weight " + shape_str(w.shape()) + " incompatible with input " +
                     shape_str(x.shape()));
  if (b.rank() != 1 || b.dim(0) != co) throw ShapeError("conv2d bias extent mismatch");
  if (h < 3 || wd < 3) throw ShapeError("conv2d kernel larger than input " + shape_str(x.shape()));
  std::size_t ho = h - 2, wo = wd - 2;
  auto out = TensorT<T>::zeros({co, ho, wo});
  for (std::size_t oc = 0; oc < co; ++oc) {
    T* oplane = out.data() + oc * ho * wo;
    for (std::size_t i = 0; i < ho * wo; ++i) oplane[i] = b.data()[oc];
    for (std::size_t ic = 0; ic < ci; ++ic) {
      const T* iplane = x.data() + ic * h * wd;
      const T* k = w.data() + (oc * ci + ic) * 9;
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx) {
          T kv = k[ky * 3 + kx];
          if (kv == T(0)) continue;
          for (std::size_t y = 0; y < ho; ++y) {
            const T* irow = iplane + (y + ky) * wd + kx;
            T* orow = oplane + y * wo;
            for (std::size_t xx = 0; xx < wo; ++xx) orow[xx] += kv * irow[xx];
          }
        }
    }
  }
  count_mults(static_cast<std::uint64_t>(co) * ci * 9 * ho * wo);

  auto* tape = detail::active_tape<T>();
  if (tape && (x.requires_grad() || w.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto xd = x.ptr(), wd_ = w.ptr(), bd = b.ptr(), od = out.ptr();
    tape->record([xd, wd_, bd, od, ci, co, h, wd, ho, wo]() {
      if (!detail::grad_ready(od)) return;
      if (bd->requires_grad) {
        bd->ensure_grad();
        for (std::size_t oc = 0; oc < co; ++oc) {
          const T* gplane = od->grad.data() + oc * ho * wo;
          T acc = T(0);
          for (std::size_t i = 0; i < ho * wo; ++i) acc += gplane[i];
          bd->grad[oc] += acc;
        }
      }
      if (wd_->requires_grad) wd_->ensure_grad();
      if (xd->requires_grad) xd->ensure_grad();
      for (std::size_t oc = 0; oc < co; ++oc) {
        const T* gplane = od->grad.data() + oc * ho * wo;
        for (std::size_t ic = 0; ic < ci; ++ic) {
          const T* iplane = xd->v.data() + ic * h * wd;
          const T* k = wd_->v.data() + (oc * ci + ic) * 9;
          T* kg = wd_->requires_grad ? wd_->grad.data() + (oc * ci + ic) * 9 : nullptr;
          T* ig = xd->requires_grad ? xd->grad.data() + ic * h * wd : nullptr;
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              T kv = k[ky * 3 + kx];
              T kacc = T(0);
              for (std::size_t y = 0; y < ho; ++y) {
                const T* irow = iplane + (y + ky) * wd + kx;
                const T* grow = gplane + y * wo;
                if (ig) {
                  T* igrow = ig + (y + ky) * wd + kx;
                  for (std::size_t xx = 0; xx < wo; ++xx) {
                    kacc += grow[xx] * irow[xx];
                    igrow[xx] += grow[xx] * kv;
                  }
                } else {
                  for (std::size_t xx = 0; xx < wo; ++xx) kacc += grow[xx] * irow[xx];
                }
              }
              if (kg) kg[ky * 3 + kx] += kacc;
            }
        }
      }
    });
  }
  return out;
}

/// Nearest-neighbour x2 upsampling of a [C, H, W] map.
template <class T>
TensorT<T> upsample_nearest2(const TensorT<T>& x) {
  if (x.rank() != 3) throw ShapeError("upsample_nearest2 expects [C,H,W]");
  std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto out = TensorT<T>::zeros({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx)
        out.data()[(ch * 2 * h + y) * 2 * w + xx] = x.data()[(ch * h + y / 2) * w + xx / 2];
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, c, h, w]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < 2 * h; ++y)
          for (std::size_t xx = 0; xx < 2 * w; ++xx)
            xd->grad[(ch * h + y / 2) * w + xx / 2] += od->grad[(ch * 2 * h + y) * 2 * w + xx];
    });
  }
  return out;
}

/// Crop a [C, H, W] map to [C, oh, ow] starting at (top, left).
template <class T>
TensorT<T> crop_2d(const TensorT<T>& x, std::size_t top, std::size_t left, std::size_t oh,
                   std::size_t ow) {
  if (x.rank() != 3) throw ShapeError("crop_2d expects [C,H,W]");
  std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (top + oh > h || left + ow > w) throw ShapeError("crop_2d region out of range");
  auto out = TensorT<T>::zeros({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      std::memcpy(out.data() + (ch * oh + y) * ow, x.data() + (ch * h + top + y) * w + left,
                  ow * sizeof(T));
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, c, h, w, top, left, oh, ow]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx)
            xd->grad[(ch * h + top + y) * w + left + xx] += od->grad[(ch * oh + y) * ow + xx];
    });
  }
  return out;
}

namespace detail {
// Mirror-without-edge index: valid only for pad < extent.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= static_cast<std::ptrdiff_t>(n)) return 2 * n - 2 - static_cast<std::size_t>(i);
  return static_cast<std::size_t>(i);
}
}  // namespace detail

/// Reflection padding of a [C, H, W] map. Padded values mirror the interior
/// excluding the edge row/column, so each pad count must be < its extent.
template <class T>
TensorT<T> reflect_pad_2d(const TensorT<T>& x, std::size_t top, std::size_t bottom,
                          std::size_t left, std::size_t right) {
  if (x.rank() != 3) throw ShapeError("reflect_pad_2d expects [C,H,W]");
  std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (top >= h || bottom >= h || left >= w || right >= w)
    throw PadError("reflect pad " + std::to_string(std::max(std::max(top, bottom), std::max(left, right))) +
                   " too large for input " + shape_str(x.shape()));
  std::size_t ho = h + top + bottom, wo = w + left + right;
  auto out = TensorT<T>::zeros({c, ho, wo});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < ho; ++y) {
      std::size_t iy = detail::reflect_index(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(top), h);
      for (std::size_t xx = 0; xx < wo; ++xx) {
        std::size_t ix = detail::reflect_index(static_cast<std::ptrdiff_t>(xx) - static_cast<std::ptrdiff_t>(left), w);
        out.data()[(ch * ho + y) * wo + xx] = x.data()[(ch * h + iy) * w + ix];
      }
    }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, c, h, w, top, left, ho, wo]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < ho; ++y) {
          std::size_t iy = detail::reflect_index(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(top), h);
          for (std::size_t xx = 0; xx < wo; ++xx) {
            std::size_t ix = detail::reflect_index(static_cast<std::ptrdiff_t>(xx) - static_cast<std::ptrdiff_t>(left), w);
            xd->grad[(ch * h + iy) * w + ix] += od->grad[(ch * ho + y) * wo + xx];
          }
        }
    });
  }
  return out;
}

/// 2x2 max pooling with stride 2 on a [C, H, W] map; trailing odd row/column
/// is dropped.
template <class T>
TensorT<T> maxpool2x2(const TensorT<T>& x) {
  if (x.rank() != 3) throw ShapeError("maxpool2x2 expects [C,H,W]");
  std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < 2 || w < 2) throw ShapeError("maxpool2x2 input too small " + shape_str(x.shape()));
  std::size_t ho = h / 2, wo = w / 2;
  auto out = TensorT<T>::zeros({c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(c * ho * wo);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        std::size_t best = (ch * h + 2 * y) * w + 2 * xx;
        T bv = x.data()[best];
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            std::size_t idx = (ch * h + 2 * y + dy) * w + 2 * xx + dx;
            if (x.data()[idx] > bv) {
              bv = x.data()[idx];
              best = idx;
            }
          }
        out.data()[(ch * ho + y) * wo + xx] = bv;
        (*argmax)[(ch * ho + y) * wo + xx] = best;
      }
  auto* tape = detail::active_tape<T>();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.ptr();
    auto od = out.ptr();
    tape->record([xd, od, argmax]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (std::size_t i = 0; i < argmax->size(); ++i) xd->grad[(*argmax)[i]] += od->grad[i];
    });
  }
  return out;
}

}  // namespace s2wat
