#pragma once

#include <memory>
#include <type_traits>

#include "s2wat/layout.hpp"
#include "s2wat/ops.hpp"
#include "s2wat/param_store.hpp"
#include "s2wat/window.hpp"

namespace s2wat {

template <class T>
struct LinearT {
  TensorT<T> w;  // [in, out]
  TensorT<T> b;  // [out]
};

template <class T>
TensorT<T> linear(const TensorT<T>& x, const LinearT<T>& p) {
  return add_bias(matmul(x, p.w), p.b);
}

template <class T>
LinearT<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  return {kaiming_uniform<T>({in, out}, in, rng), kaiming_uniform<T>({out}, in, rng)};
}

template <class T>
LinearT<T> zero_linear(std::size_t in, std::size_t out) {
  return {TensorT<T>::zeros({in, out}), TensorT<T>::zeros({out})};
}

/// Fused-projection self-attention weights for one branch.
template <class T>
struct AttentionParamsT {
  std::size_t heads = 1;
  LinearT<T> qkv;   // [C, 3C]
  LinearT<T> proj;  // [C, C]
};

template <class T>
AttentionParamsT<T> make_attention(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads)
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  return {heads, make_linear<T>(dim, 3 * dim, rng), make_linear<T>(dim, dim, rng)};
}

/// Learnable per-head logit bias for a side x side window, indexed by the
/// relative coordinates of each token pair.
template <class T>
struct RelPosBiasT {
  std::size_t side = 0;
  std::size_t heads = 1;
  TensorT<T> table;  // [(2*side-1)^2, heads]
};

template <class T>
RelPosBiasT<T> make_rel_pos_bias(std::size_t side, std::size_t heads, Rng& rng) {
  std::size_t span = 2 * side - 1;
  return {side, heads, trunc_normal<T>({span * span, heads}, 0.02, rng)};
}

namespace detail {

// softmax(q k^T / sqrt(d) [+ bias]) v over [B, h, L, d] head tensors.
template <class T>
TensorT<T> scaled_dot_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                                std::type_identity_t<const TensorT<T>*> bias,
                                TensorT<T>* attn_capture) {
  std::size_t d = q.dim(q.rank() - 1);
  T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
  auto logits = scalar_mul(matmul(q, transpose_last2(k)), scale);
  if (bias) logits = add(logits, *bias);
  auto attn = softmax_lastdim(logits);
  if (attn_capture) *attn_capture = attn.value_copy();
  return matmul(attn, v);
}

// [B, L, C] -> [B, heads, L, C/heads]
template <class T>
TensorT<T> split_heads(const TensorT<T>& x, std::size_t heads) {
  std::size_t b = x.dim(0), l = x.dim(1), c = x.dim(2);
  std::size_t d = c / heads;
  auto map = std::make_shared<const std::vector<std::size_t>>(head_split_map(b, l, heads, d));
  return gather_elems(x, {b, heads, l, d}, map);
}

// [B, heads, L, d] -> [B, L, heads*d]
template <class T>
TensorT<T> merge_heads(const TensorT<T>& x) {
  std::size_t b = x.dim(0), heads = x.dim(1), l = x.dim(2), d = x.dim(3);
  auto map = std::make_shared<const std::vector<std::size_t>>(head_merge_map(b, l, heads, d));
  return gather_elems(x, {b, l, heads * d}, map);
}

// Batched self-attention over [B, L, C] with fused qkv projection.
template <class T>
TensorT<T> self_attention_batched(const TensorT<T>& x, const AttentionParamsT<T>& p,
                                  std::type_identity_t<const TensorT<T>*> bias,
                                  TensorT<T>* attn_capture) {
  std::size_t c = x.dim(2);
  if (c % p.heads) throw ConfigError("channels not divisible by head count");
  auto qkv = linear(x, p.qkv);
  auto q = split_heads(slice_lastdim(qkv, 0, c), p.heads);
  auto k = split_heads(slice_lastdim(qkv, c, c), p.heads);
  auto v = split_heads(slice_lastdim(qkv, 2 * c, c), p.heads);
  auto ctx = scaled_dot_attention(q, k, v, bias, attn_capture);
  return linear(merge_heads(ctx), p.proj);
}

}  // namespace detail

/// [H, W, C] grid -> [num_windows, window_len, C] token blocks.
template <class T>
TensorT<T> window_partition(const TensorT<T>& grid, const WindowGeometry& g) {
  if (grid.rank() != 3 || grid.dim(0) != g.grid_h || grid.dim(1) != g.grid_w)
    throw ShapeError("window_partition grid " + shape_str(grid.shape()) +
                     " does not match geometry");
  auto map = std::make_shared<const std::vector<std::size_t>>(window_partition_map(g));
  return gather_rows(grid, {g.num_windows(), g.window_len(), grid.dim(2)}, map);
}

/// Exact inverse of window_partition.
template <class T>
TensorT<T> window_reverse(const TensorT<T>& windows, const WindowGeometry& g) {
  if (windows.rank() != 3 || windows.dim(0) != g.num_windows() ||
      windows.dim(1) != g.window_len())
    throw ShapeError("window_reverse input " + shape_str(windows.shape()) +
                     " does not match geometry");
  auto map = std::make_shared<const std::vector<std::size_t>>(window_reverse_map(g));
  return gather_rows(windows, {g.grid_h, g.grid_w, windows.dim(2)}, map);
}

/// Multi-head self-attention within each window of the grid. Square windows
/// carry a relative position bias; strip windows never do.
/// attn_capture, when given, receives the [num_windows, heads, L, L]
/// post-softmax attention maps.
template <class T>
TensorT<T> window_attention(const TensorT<T>& grid, const WindowGeometry& g,
                            const AttentionParamsT<T>& p,
                            std::type_identity_t<const RelPosBiasT<T>*> bias,
                            TensorT<T>* attn_capture = nullptr) {
  g.validate();
  if (g.kind == WindowKind::kSquare) {
    if (!bias) throw ConfigError("square window attention requires a relative position bias");
    if (bias->side != g.window_rows())
      throw ConfigError("bias table side " + std::to_string(bias->side) +
                        " does not match window side " + std::to_string(g.window_rows()));
  } else if (bias) {
    throw ConfigError("relative position bias is not supported on strip windows");
  }
  auto windows = window_partition(grid, g);
  TensorT<T> bias_full;
  if (bias) {
    auto map = std::make_shared<const std::vector<std::size_t>>(
        bias_tile_map(g.num_windows(), p.heads, bias->side));
    bias_full = gather_elems(bias->table, {g.num_windows(), p.heads, g.window_len(), g.window_len()},
                             map);
  }
  auto out = detail::self_attention_batched(windows, p, bias ? &bias_full : nullptr, attn_capture);
  return window_reverse(out, g);
}

/// Full self-attention over a [N, C] token sequence.
template <class T>
TensorT<T> global_msa(const TensorT<T>& seq, const AttentionParamsT<T>& p,
                      TensorT<T>* attn_capture = nullptr) {
  if (seq.rank() != 2) throw ShapeError("global_msa expects [N, C]");
  std::size_t n = seq.dim(0), c = seq.dim(1);
  auto out = detail::self_attention_batched(reshape(seq, {1, n, c}), p, nullptr, attn_capture);
  return reshape(out, {n, c});
}

/// Per-token fusion: token i is weighted by its dot-product similarity to
/// each candidate (itself included) and the weighted sum is returned. The
/// weights are raw dot products; `softmax_weights` exposes the normalized
/// variant.
template <class T>
TensorT<T> attn_merge(const TensorT<T>& x, const TensorT<T>& a, const TensorT<T>& b,
                      const TensorT<T>& c, bool softmax_weights = false) {
  if (x.shape() != a.shape() || x.shape() != b.shape() || x.shape() != c.shape())
    throw ShapeError("attn_merge operands must share shape");
  if (x.rank() != 2) throw ShapeError("attn_merge expects [N, d] operands");
  std::size_t n = x.dim(0), d = x.dim(1);
  auto xr = reshape(x, {n, 1, d});
  std::vector<TensorT<T>> parts{xr, reshape(a, {n, 1, d}), reshape(b, {n, 1, d}),
                                reshape(c, {n, 1, d})};
  auto stacked = concat(parts, 1);                            // [n, 4, d]
  auto weights = matmul(xr, transpose_last2(stacked));        // [n, 1, 4]
  if (softmax_weights) weights = softmax_lastdim(weights);
  return reshape(matmul(weights, stacked), {n, d});           // [n, 1, d] -> [n, d]
}

template <class T>
struct LayerNormParamsT {
  TensorT<T> gamma, beta;
};

template <class T>
LayerNormParamsT<T> make_layer_norm(std::size_t dim) {
  return {TensorT<T>::full({dim}, T(1)), TensorT<T>::zeros({dim})};
}

/// Ablation switches: how branch outputs are fused and which branches run.
enum class FusionMode { kAttnMerge, kSum, kConcat };
enum class BranchMode { kAll, kHorizontal, kVertical, kSquare };

FusionMode fusion_mode_from_name(const std::string& name);
BranchMode branch_mode_from_name(const std::string& name);
std::string fusion_mode_name(FusionMode m);
std::string branch_mode_name(BranchMode m);

struct SpwOptions {
  std::size_t strip = 1;
  FusionMode fusion = FusionMode::kAttnMerge;
  BranchMode branches = BranchMode::kAll;
  bool merge_softmax = false;
};

/// Weights of one SpW attention block: three independent branch attentions,
/// the square branch's bias table, two layer norms and the MLP. The concat
/// fusion variant carries an extra 4C -> C projection.
template <class T>
struct SpwBlockParamsT {
  LayerNormParamsT<T> ln1, ln2;
  AttentionParamsT<T> horiz, vert, square;
  RelPosBiasT<T> bias;
  LinearT<T> mlp_fc1, mlp_fc2;  // C -> 4C -> C
  LinearT<T> fuse;              // only when fusion == kConcat
};

template <class T>
SpwBlockParamsT<T> make_spw_block(std::size_t dim, std::size_t heads, std::size_t strip,
                                  Rng& rng, FusionMode fusion = FusionMode::kAttnMerge) {
  SpwBlockParamsT<T> p;
  p.ln1 = make_layer_norm<T>(dim);
  p.ln2 = make_layer_norm<T>(dim);
  p.horiz = make_attention<T>(dim, heads, rng);
  p.vert = make_attention<T>(dim, heads, rng);
  p.square = make_attention<T>(dim, heads, rng);
  p.bias = make_rel_pos_bias<T>(2 * strip, heads, rng);
  p.mlp_fc1 = make_linear<T>(dim, 4 * dim, rng);
  p.mlp_fc2 = make_linear<T>(4 * dim, dim, rng);
  if (fusion == FusionMode::kConcat) p.fuse = make_linear<T>(4 * dim, dim, rng);
  return p;
}

/// One SpW attention block on an [H, W, C] grid (already padded to tile):
/// branch attentions on the normalized input, fusion with a residual, then a
/// pre-norm MLP with residual. Single-branch modes skip the fusion entirely
/// (the window-size ablation); sum/concat replace the similarity fusion.
template <class T>
TensorT<T> spw_block(const TensorT<T>& grid, const SpwBlockParamsT<T>& p,
                     const SpwOptions& opts) {
  if (grid.rank() != 3) throw ShapeError("spw_block expects [H, W, C]");
  std::size_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  std::size_t strip = opts.strip;
  auto u = layer_norm(grid, p.ln1.gamma, p.ln1.beta);

  TensorT<T> fused;
  if (opts.branches != BranchMode::kAll) {
    switch (opts.branches) {
      case BranchMode::kHorizontal:
        fused = window_attention(u, horizontal_windows(strip, h, w), p.horiz, nullptr);
        break;
      case BranchMode::kVertical:
        fused = window_attention(u, vertical_windows(strip, h, w), p.vert, nullptr);
        break;
      default:
        fused = window_attention(u, square_windows(strip, h, w), p.square, &p.bias);
        break;
    }
  } else {
    auto zh = window_attention(u, horizontal_windows(strip, h, w), p.horiz, nullptr);
    auto zv = window_attention(u, vertical_windows(strip, h, w), p.vert, nullptr);
    auto zs = window_attention(u, square_windows(strip, h, w), p.square, &p.bias);
    switch (opts.fusion) {
      case FusionMode::kAttnMerge:
        fused = reshape(attn_merge(reshape(u, {h * w, c}), reshape(zh, {h * w, c}),
                                   reshape(zv, {h * w, c}), reshape(zs, {h * w, c}),
                                   opts.merge_softmax),
                        {h, w, c});
        break;
      case FusionMode::kSum:
        fused = add(add(u, zh), add(zv, zs));
        break;
      case FusionMode::kConcat: {
        if (!p.fuse.w.defined()) throw ConfigError("concat fusion needs the fuse projection");
        std::vector<TensorT<T>> parts{u, zh, zv, zs};
        fused = linear(concat(parts, 2), p.fuse);
        break;
      }
    }
  }

  auto zt = add(fused, grid);
  auto m = layer_norm(zt, p.ln2.gamma, p.ln2.beta);
  m = linear(m, p.mlp_fc1);
  m = gelu(m);
  m = linear(m, p.mlp_fc2);
  return add(m, zt);
}

/// Default fusion path: all three branches merged by similarity.
template <class T>
TensorT<T> spw_block(const TensorT<T>& grid, const SpwBlockParamsT<T>& p, std::size_t strip,
                     bool merge_softmax = false) {
  return spw_block(grid, p, SpwOptions{strip, FusionMode::kAttnMerge, BranchMode::kAll,
                                       merge_softmax});
}

// ---------------------------------------------------------------------------
// parameter registration (names are fixed for checkpoint compatibility)
// ---------------------------------------------------------------------------

template <class T>
void register_linear(ParameterStoreT<T>& store, const std::string& prefix, LinearT<T>& p) {
  store.add(prefix + ".w", p.w);
  store.add(prefix + ".b", p.b);
}

template <class T>
void register_layer_norm(ParameterStoreT<T>& store, const std::string& prefix,
                         LayerNormParamsT<T>& p) {
  store.add(prefix + ".g", p.gamma);
  store.add(prefix + ".b", p.beta);
}

template <class T>
void register_attention(ParameterStoreT<T>& store, const std::string& prefix,
                        AttentionParamsT<T>& p) {
  register_linear(store, prefix + ".qkv", p.qkv);
  register_linear(store, prefix + ".proj", p.proj);
}

template <class T>
void register_spw_block(ParameterStoreT<T>& store, const std::string& prefix,
                        SpwBlockParamsT<T>& p) {
  register_layer_norm(store, prefix + ".ln1", p.ln1);
  register_layer_norm(store, prefix + ".ln2", p.ln2);
  register_attention(store, prefix + ".h", p.horiz);
  register_attention(store, prefix + ".v", p.vert);
  register_attention(store, prefix + ".sq", p.square);
  store.add(prefix + ".sq.bias_table", p.bias.table);
  register_linear(store, prefix + ".mlp.fc1", p.mlp_fc1);
  register_linear(store, prefix + ".mlp.fc2", p.mlp_fc2);
  if (p.fuse.w.defined()) register_linear(store, prefix + ".fuse", p.fuse);
}

}  // namespace s2wat
