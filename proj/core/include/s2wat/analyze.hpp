#pragma once

#include <string>
#include <vector>

#include "s2wat/model.hpp"

namespace s2wat {

/// Outputs of the diagnostics pass.
struct AnalyzeResult {
  std::size_t content_grid_h = 0, content_grid_w = 0;
  std::size_t style_grid_h = 0, style_grid_w = 0;
  std::size_t heads = 0;
  Tensor cross_attention;        // [1, heads, N_c, N_s], raw softmax rows
  double max_row_sum_error = 0;  // max |row sum - 1| over all heads
  std::vector<std::string> feature_files;
  std::vector<std::string> attention_files;
  std::vector<std::string> similarity_files;
  // Probe points on the style grid: four corners then the center, as
  // (row, col) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> probe_points;
};

/// Writes encoder feature maps (per channel of the deepest stage), the first
/// transfer layer's cross-attention maps (per head) and five similarity maps
/// for the style-grid probe points, all as min-max normalized grayscale PPMs
/// under outdir/{features,attention,similarity}.
AnalyzeResult analyze_model(const ModelT<float>& model, const Tensor& content,
                            const Tensor& style, const std::string& outdir);

}  // namespace s2wat
