#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "s2wat/common.hpp"

namespace s2wat {

enum class WindowKind { kHorizontal, kVertical, kSquare };

std::string window_kind_name(WindowKind k);

/// One attention windowing scheme over an H_p x W_p patch grid: horizontal
/// strips of n rows, vertical strips of n columns, or 2n x 2n squares.
struct WindowGeometry {
  WindowKind kind = WindowKind::kSquare;
  std::size_t strip = 1;  // n
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  std::size_t window_rows() const {
    switch (kind) {
      case WindowKind::kHorizontal: return strip;
      case WindowKind::kVertical: return grid_h;
      default: return 2 * strip;
    }
  }
  std::size_t window_cols() const {
    switch (kind) {
      case WindowKind::kHorizontal: return grid_w;
      case WindowKind::kVertical: return strip;
      default: return 2 * strip;
    }
  }
  std::size_t window_len() const { return window_rows() * window_cols(); }
  std::size_t num_windows() const { return (grid_h * grid_w) / window_len(); }

  /// Throws GeometryError when the grid does not tile into whole windows.
  void validate() const;
};

WindowGeometry horizontal_windows(std::size_t strip, std::size_t grid_h, std::size_t grid_w);
WindowGeometry vertical_windows(std::size_t strip, std::size_t grid_h, std::size_t grid_w);
WindowGeometry square_windows(std::size_t strip, std::size_t grid_h, std::size_t grid_w);

/// Token map for partitioning: entry (window*len + pos) holds the grid token
/// index (row-major) it copies. Windows are enumerated row-major over the
/// window grid; tokens row-major within each window.
std::vector<std::size_t> window_partition_map(const WindowGeometry& g);

/// Inverse permutation of window_partition_map.
std::vector<std::size_t> window_reverse_map(const WindowGeometry& g);

/// Relative-coordinate bucket table for a side x side window: entry i*L+j
/// (L = side^2) holds (dy+side-1)*(2*side-1) + (dx+side-1) for token pair
/// (i, j). Buckets lie in [0, (2*side-1)^2).
std::vector<std::size_t> relative_bias_index(std::size_t side);

}  // namespace s2wat
