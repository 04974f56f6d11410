#pragma once

#include "s2wat/attention.hpp"

namespace s2wat {

/// Separate-projection cross attention: queries from the content path, keys
/// and values from the style sequence.
template <class T>
struct CrossAttentionParamsT {
  std::size_t heads = 1;
  LinearT<T> q, k, v, proj;
};

template <class T>
CrossAttentionParamsT<T> make_cross_attention(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads)
    throw ConfigError("cross attention dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  return {heads, make_linear<T>(dim, dim, rng), make_linear<T>(dim, dim, rng),
          make_linear<T>(dim, dim, rng), make_linear<T>(dim, dim, rng)};
}

/// One transfer layer: pre-norm self-attention on the content sequence, then
/// cross attention against the raw (un-normalized) style sequence, then a
/// pre-norm MLP; every sub-layer is residual.
template <class T>
struct TransferLayerParamsT {
  LayerNormParamsT<T> ln1, ln2, ln3;
  AttentionParamsT<T> msa;
  CrossAttentionParamsT<T> mha;
  LinearT<T> mlp_fc1, mlp_fc2;  // D -> 4D -> D
};

template <class T>
TransferLayerParamsT<T> make_transfer_layer(std::size_t dim, std::size_t heads, Rng& rng) {
  TransferLayerParamsT<T> p;
  p.ln1 = make_layer_norm<T>(dim);
  p.ln2 = make_layer_norm<T>(dim);
  p.ln3 = make_layer_norm<T>(dim);
  p.msa = make_attention<T>(dim, heads, rng);
  p.mha = make_cross_attention<T>(dim, heads, rng);
  p.mlp_fc1 = make_linear<T>(dim, 4 * dim, rng);
  p.mlp_fc2 = make_linear<T>(4 * dim, dim, rng);
  return p;
}

template <class T>
void register_transfer_layer(ParameterStoreT<T>& store, const std::string& prefix,
                             TransferLayerParamsT<T>& p) {
  register_layer_norm(store, prefix + ".ln1", p.ln1);
  register_layer_norm(store, prefix + ".ln2", p.ln2);
  register_layer_norm(store, prefix + ".ln3", p.ln3);
  register_attention(store, prefix + ".msa", p.msa);
  register_linear(store, prefix + ".mha.q", p.mha.q);
  register_linear(store, prefix + ".mha.k", p.mha.k);
  register_linear(store, prefix + ".mha.v", p.mha.v);
  register_linear(store, prefix + ".mha.proj", p.mha.proj);
  register_linear(store, prefix + ".mlp.fc1", p.mlp_fc1);
  register_linear(store, prefix + ".mlp.fc2", p.mlp_fc2);
}

/// c: [N_c, D] content tokens, s: [N_s, D] style tokens -> [N_c, D].
/// cross_capture, when given, receives the [1, heads, N_c, N_s] cross
/// attention maps of this layer.
template <class T>
TensorT<T> transfer_layer(const TensorT<T>& c, const TensorT<T>& s,
                          const TransferLayerParamsT<T>& p,
                          TensorT<T>* cross_capture = nullptr) {
  if (c.rank() != 2 || s.rank() != 2 || c.dim(1) != s.dim(1))
    throw ShapeError("transfer_layer operands " + shape_str(c.shape()) + " vs " +
                     shape_str(s.shape()));
  std::size_t nc = c.dim(0), ns = s.dim(0), dim = c.dim(1);
  auto chat = add(global_msa(layer_norm(c, p.ln1.gamma, p.ln1.beta), p.msa), c);

  auto q = linear(layer_norm(chat, p.ln2.gamma, p.ln2.beta), p.mha.q);
  auto k = linear(s, p.mha.k);
  auto v = linear(s, p.mha.v);
  auto qh = detail::split_heads(reshape(q, {1, nc, dim}), p.mha.heads);
  auto kh = detail::split_heads(reshape(k, {1, ns, dim}), p.mha.heads);
  auto vh = detail::split_heads(reshape(v, {1, ns, dim}), p.mha.heads);
  auto ctx = detail::scaled_dot_attention(qh, kh, vh, nullptr, cross_capture);
  auto mha_out = linear(reshape(detail::merge_heads(ctx), {nc, dim}), p.mha.proj);
  auto ctil = add(mha_out, chat);

  auto m = layer_norm(ctil, p.ln3.gamma, p.ln3.beta);
  m = linear(m, p.mlp_fc1);
  m = gelu(m);
  m = linear(m, p.mlp_fc2);
  return add(m, ctil);
}

/// Stacked transfer layers; the content sequence length is preserved.
/// first_cross captures the cross-attention maps of layer 0.
template <class T>
TensorT<T> transfer_forward(const TensorT<T>& f_c, const TensorT<T>& f_s,
                            const std::vector<TransferLayerParamsT<T>>& layers,
                            TensorT<T>* first_cross = nullptr) {
  TensorT<T> x = f_c;
  for (std::size_t i = 0; i < layers.size(); ++i)
    x = transfer_layer(x, f_s, layers[i], i == 0 ? first_cross : nullptr);
  return x;
}

/// [N, D] sequence -> [D, H, W] channel-first map; exact inverse of the
/// row-major flattening used before the transfer module. Token k lands at
/// (k / W, k % W).
template <class T>
TensorT<T> patch_reverse(const TensorT<T>& seq, std::size_t h, std::size_t w) {
  if (seq.rank() != 2) throw ShapeError("patch_reverse expects [N, D]");
  if (seq.dim(0) != h * w)
    throw ShapeError("patch_reverse token count " + std::to_string(seq.dim(0)) +
                     " does not match grid " + std::to_string(h) + "x" + std::to_string(w));
  std::size_t d = seq.dim(1);
  auto map = std::make_shared<const std::vector<std::size_t>>(patch_reverse_map(h, w, d));
  return gather_elems(seq, {d, h, w}, map);
}

}  // namespace s2wat
