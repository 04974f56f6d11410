#pragma once

#include <cstddef>
#include <vector>

#include "s2wat/common.hpp"

namespace s2wat {

// Index-map builders for the gather-based layout rearrangements. Each map
// holds, per output element (or row), the flat input index it copies.

/// [3, H, W] image -> [H/2, W/2, 12] patch vectors; H, W even. Patch vector
/// layout is (dy, dx, channel), channel fastest.
std::vector<std::size_t> patch_embed_map(std::size_t h, std::size_t w);

/// [H, W, C] grid -> [H/2, W/2, 4C]; H, W even. Channel groups are the 2x2
/// sub-grids in (dy, dx) order (0,0), (1,0), (0,1), (1,1).
std::vector<std::size_t> patch_merge_map(std::size_t h, std::size_t w, std::size_t c);

/// [H*W, C] token rows (row-major over the grid) -> [C, H, W] map.
std::vector<std::size_t> patch_reverse_map(std::size_t h, std::size_t w, std::size_t c);

/// Row map reflecting an [H, W, C] grid bottom/right to [new_h, new_w, C].
/// Mirror-without-edge; throws PadError when the grid is too small.
std::vector<std::size_t> grid_pad_map(std::size_t h, std::size_t w, std::size_t new_h,
                                      std::size_t new_w);

/// Row map cropping an [H, W, C] grid back to its top-left [new_h, new_w].
std::vector<std::size_t> grid_crop_map(std::size_t h, std::size_t w, std::size_t new_h,
                                       std::size_t new_w);

/// [B, L, heads, d] -> [B, heads, L, d] element permutation.
std::vector<std::size_t> head_split_map(std::size_t b, std::size_t l, std::size_t heads,
                                        std::size_t d);

/// [B, heads, L, d] -> [B, L, heads, d] element permutation.
std::vector<std::size_t> head_merge_map(std::size_t b, std::size_t l, std::size_t heads,
                                        std::size_t d);

/// Tiles a [(2*side-1)^2, heads] bias table to [batch, heads, L, L] logits
/// (L = side^2) through the relative-coordinate bucket index.
std::vector<std::size_t> bias_tile_map(std::size_t batch, std::size_t heads, std::size_t side);

}  // namespace s2wat
