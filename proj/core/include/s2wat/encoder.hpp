#pragma once

#include <array>

#include "s2wat/attention.hpp"

namespace s2wat {

/// Hyperparameters of the three-stage hierarchical encoder. Stage k operates
/// at channel dim embed_dim * 2^k.
struct EncoderConfig {
  std::size_t embed_dim = 96;
  std::array<std::size_t, 3> blocks{2, 2, 2};
  std::array<std::size_t, 3> strips{4, 4, 4};
  std::array<std::size_t, 3> heads{3, 6, 12};
  bool merge_softmax = false;
  FusionMode fusion = FusionMode::kAttnMerge;   // ablation switch
  BranchMode branches = BranchMode::kAll;       // ablation switch

  std::size_t stage_dim(std::size_t k) const { return embed_dim << k; }

  SpwOptions block_options(std::size_t k) const {
    return {strips[k], fusion, branches, merge_softmax};
  }

  void validate() const {
    if (embed_dim == 0 || embed_dim % 2)
      throw ConfigError("embed_dim must be positive and even, got " + std::to_string(embed_dim));
    for (std::size_t k = 0; k < 3; ++k) {
      if (strips[k] == 0) throw ConfigError("strip width must be positive");
      if (blocks[k] == 0) throw ConfigError("each stage needs at least one block");
      if (heads[k] == 0 || stage_dim(k) % heads[k])
        throw ConfigError("stage " + std::to_string(k + 1) + " dim " +
                          std::to_string(stage_dim(k)) + " not divisible by heads " +
                          std::to_string(heads[k]));
    }
  }
};

template <class T>
struct EncoderParamsT {
  LinearT<T> patch_embed;  // [12, C]
  std::array<std::vector<SpwBlockParamsT<T>>, 3> stages;
  std::array<LinearT<T>, 2> merges;  // [4C, 2C], [8C, 4C]
};

template <class T>
EncoderParamsT<T> make_encoder(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParamsT<T> p;
  p.patch_embed = make_linear<T>(12, cfg.embed_dim, rng);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < cfg.blocks[k]; ++i)
      p.stages[k].push_back(
          make_spw_block<T>(cfg.stage_dim(k), cfg.heads[k], cfg.strips[k], rng, cfg.fusion));
  p.merges[0] = make_linear<T>(4 * cfg.embed_dim, 2 * cfg.embed_dim, rng);
  p.merges[1] = make_linear<T>(8 * cfg.embed_dim, 4 * cfg.embed_dim, rng);
  return p;
}

template <class T>
void register_encoder(ParameterStoreT<T>& store, EncoderParamsT<T>& p, const EncoderConfig& cfg) {
  register_linear(store, "encoder.patch_embed", p.patch_embed);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < cfg.blocks[k]; ++i)
      register_spw_block(store,
                         "encoder.stage" + std::to_string(k + 1) + ".block" + std::to_string(i),
                         p.stages[k][i]);
  register_linear(store, "encoder.merge2", p.merges[0]);
  register_linear(store, "encoder.merge3", p.merges[1]);
}

/// Non-overlapping 2x2 patch flattening (12-dim vectors) plus linear
/// projection: [3, H, W] image -> [H/2, W/2, C] token grid. H and W even.
template <class T>
TensorT<T> patch_embed(const TensorT<T>& img, const LinearT<T>& proj) {
  if (img.rank() != 3 || img.dim(0) != 3) throw ShapeError("patch_embed expects [3, H, W]");
  std::size_t h = img.dim(1), w = img.dim(2);
  auto map = std::make_shared<const std::vector<std::size_t>>(patch_embed_map(h, w));
  auto patches = gather_elems(img, {h / 2, w / 2, 12}, map);
  return linear(patches, proj);
}

/// Original extents recorded when a grid is padded.
struct PadRecord {
  std::size_t orig_h = 0, orig_w = 0;
};

/// Reflect-pads an [H, W, C] grid bottom/right to the next multiple of
/// 2*strip. Already-divisible grids pass through untouched.
template <class T>
std::pair<TensorT<T>, PadRecord> pad_grid(const TensorT<T>& grid, std::size_t strip) {
  if (grid.rank() != 3) throw ShapeError("pad_grid expects [H, W, C]");
  std::size_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  std::size_t unit = 2 * strip;
  std::size_t nh = (h + unit - 1) / unit * unit;
  std::size_t nw = (w + unit - 1) / unit * unit;
  PadRecord rec{h, w};
  if (nh == h && nw == w) return {grid, rec};
  auto map = std::make_shared<const std::vector<std::size_t>>(grid_pad_map(h, w, nh, nw));
  return {gather_rows(grid, {nh, nw, c}, map), rec};
}

/// Crops a padded grid back to the recorded extents.
template <class T>
TensorT<T> unpad_grid(const TensorT<T>& grid, const PadRecord& rec) {
  if (grid.rank() != 3) throw ShapeError("unpad_grid expects [H, W, C]");
  std::size_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  if (rec.orig_h > h || rec.orig_w > w)
    throw ShapeError("unpad_grid record " + std::to_string(rec.orig_h) + "x" +
                     std::to_string(rec.orig_w) + " exceeds grid " + shape_str(grid.shape()));
  if (rec.orig_h == h && rec.orig_w == w) return grid;
  auto map =
      std::make_shared<const std::vector<std::size_t>>(grid_crop_map(h, w, rec.orig_h, rec.orig_w));
  return gather_rows(grid, {rec.orig_h, rec.orig_w, c}, map);
}

/// 2x downsampling: gathers the four stride-2 sub-grids into 4C channels and
/// projects them to 2C. Extents must be even.
template <class T>
TensorT<T> patch_merge(const TensorT<T>& grid, const LinearT<T>& proj) {
  if (grid.rank() != 3) throw ShapeError("patch_merge expects [H, W, C]");
  std::size_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  auto map = std::make_shared<const std::vector<std::size_t>>(patch_merge_map(h, w, c));
  auto gathered = gather_elems(grid, {h / 2, w / 2, 4 * c}, map);
  return linear(gathered, proj);
}

template <class T>
struct StageFeaturesT {
  TensorT<T> stage1, stage2, stage3;  // [H/2,W/2,C], [H/4,W/4,2C], [H/8,W/8,4C] grids
};

namespace detail {

// Pad to 2*strip multiples, run the block stack, crop back.
template <class T>
TensorT<T> run_stage(const TensorT<T>& grid, const std::vector<SpwBlockParamsT<T>>& blocks,
                     const SpwOptions& opts) {
  auto [x, rec] = pad_grid(grid, opts.strip);
  for (const auto& blk : blocks) x = spw_block(x, blk, opts);
  return unpad_grid(x, rec);
}

// Reflect-pad odd extents to even so patch merging can consume the grid;
// merging the padded grid yields ceil(prev/2) extents directly.
template <class T>
TensorT<T> pad_to_even(const TensorT<T>& grid) {
  std::size_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  std::size_t nh = h + (h % 2), nw = w + (w % 2);
  if (nh == h && nw == w) return grid;
  auto map = std::make_shared<const std::vector<std::size_t>>(grid_pad_map(h, w, nh, nw));
  return gather_rows(grid, {nh, nw, c}, map);
}

}  // namespace detail

/// Three-stage hierarchical encoding. Stage extents follow ceil(prev/2) per
/// axis; for inputs divisible by 16 they are exact halvings H/2, H/4, H/8.
template <class T>
StageFeaturesT<T> encoder_forward(const TensorT<T>& img, const EncoderConfig& cfg,
                                  const EncoderParamsT<T>& p) {
  StageFeaturesT<T> out;
  auto t = patch_embed(img, p.patch_embed);
  out.stage1 = detail::run_stage(t, p.stages[0], cfg.block_options(0));
  auto m2 = patch_merge(detail::pad_to_even(out.stage1), p.merges[0]);
  out.stage2 = detail::run_stage(m2, p.stages[1], cfg.block_options(1));
  auto m3 = patch_merge(detail::pad_to_even(out.stage2), p.merges[1]);
  out.stage3 = detail::run_stage(m3, p.stages[2], cfg.block_options(2));
  return out;
}

}  // namespace s2wat
