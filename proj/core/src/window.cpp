#include "s2wat/window.hpp"

namespace s2wat {

std::string window_kind_name(WindowKind k) {
  switch (k) {
    case WindowKind::kHorizontal: return "horizontal";
    case WindowKind::kVertical: return "vertical";
    default: return "square";
  }
}

void WindowGeometry::validate() const {
  if (strip == 0) throw GeometryError("strip width must be positive");
  if (grid_h == 0 || grid_w == 0) throw GeometryError("empty patch grid");
  switch (kind) {
    case WindowKind::kHorizontal:
      if (grid_h % strip)
        throw GeometryError("grid height " + std::to_string(grid_h) +
                            " not divisible by strip " + std::to_string(strip));
      break;
    case WindowKind::kVertical:
      if (grid_w % strip)
        throw GeometryError("grid width " + std::to_string(grid_w) + " not divisible by strip " +
                            std::to_string(strip));
      break;
    case WindowKind::kSquare:
      if (grid_h % (2 * strip) || grid_w % (2 * strip))
        throw GeometryError("grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                            " not divisible by window side " + std::to_string(2 * strip));
      break;
  }
}

WindowGeometry horizontal_windows(std::size_t strip, std::size_t grid_h, std::size_t grid_w) {
  return {WindowKind::kHorizontal, strip, grid_h, grid_w};
}
WindowGeometry vertical_windows(std::size_t strip, std::size_t grid_h, std::size_t grid_w) {
  return {WindowKind::kVertical, strip, grid_h, grid_w};
}
WindowGeometry square_windows(std::size_t strip, std::size_t grid_h, std::size_t grid_w) {
  return {WindowKind::kSquare, strip, grid_h, grid_w};
}

std::vector<std::size_t> window_partition_map(const WindowGeometry& g) {
  g.validate();
  std::size_t wr = g.window_rows(), wc = g.window_cols();
  std::size_t wins_x = g.grid_w / wc;  // windows per grid row
  std::vector<std::size_t> map(g.grid_h * g.grid_w);
  std::size_t t = 0;
  for (std::size_t win = 0; win < g.num_windows(); ++win) {
    std::size_t wy = win / wins_x, wx = win % wins_x;
    for (std::size_t r = 0; r < wr; ++r)
      for (std::size_t c = 0; c < wc; ++c) map[t++] = (wy * wr + r) * g.grid_w + wx * wc + c;
  }
  return map;
}

std::vector<std::size_t> window_reverse_map(const WindowGeometry& g) {
  auto fwd = window_partition_map(g);
  std::vector<std::size_t> inv(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) inv[fwd[i]] = i;
  return inv;
}

std::vector<std::size_t> relative_bias_index(std::size_t side) {
  std::size_t len = side * side;
  std::size_t span = 2 * side - 1;
  std::vector<std::size_t> idx(len * len);
  for (std::size_t i = 0; i < len; ++i) {
    std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(i / side);
    std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(i % side);
    for (std::size_t j = 0; j < len; ++j) {
      std::ptrdiff_t yj = static_cast<std::ptrdiff_t>(j / side);
      std::ptrdiff_t xj = static_cast<std::ptrdiff_t>(j % side);
      std::size_t dy = static_cast<std::size_t>(yi - yj + static_cast<std::ptrdiff_t>(side) - 1);
      std::size_t dx = static_cast<std::size_t>(xi - xj + static_cast<std::ptrdiff_t>(side) - 1);
      idx[i * len + j] = dy * span + dx;
    }
  }
  return idx;
}

}  // namespace s2wat
