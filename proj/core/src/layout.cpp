#include "s2wat/layout.hpp"

#include "s2wat/window.hpp"

namespace s2wat {

std::vector<std::size_t> patch_embed_map(std::size_t h, std::size_t w) {
  if (h % 2 || w % 2)
    throw ShapeError("patch embedding requires even image extents, got " + std::to_string(h) +
                     "x" + std::to_string(w));
  std::size_t hp = h / 2, wp = w / 2;
  std::vector<std::size_t> map(hp * wp * 12);
  std::size_t o = 0;
  for (std::size_t py = 0; py < hp; ++py)
    for (std::size_t px = 0; px < wp; ++px)
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx)
          for (std::size_t c = 0; c < 3; ++c)
            map[o++] = c * h * w + (2 * py + dy) * w + (2 * px + dx);
  return map;
}

std::vector<std::size_t> patch_merge_map(std::size_t h, std::size_t w, std::size_t c) {
  if (h % 2 || w % 2)
    throw ShapeError("patch merging requires even grid extents, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  static constexpr std::size_t kOffsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};  // (dy, dx)
  std::size_t ho = h / 2, wo = w / 2;
  std::vector<std::size_t> map(ho * wo * 4 * c);
  std::size_t o = 0;
  for (std::size_t y = 0; y < ho; ++y)
    for (std::size_t x = 0; x < wo; ++x)
      for (std::size_t g = 0; g < 4; ++g)
        for (std::size_t ch = 0; ch < c; ++ch)
          map[o++] = ((2 * y + kOffsets[g][0]) * w + 2 * x + kOffsets[g][1]) * c + ch;
  return map;
}

std::vector<std::size_t> patch_reverse_map(std::size_t h, std::size_t w, std::size_t c) {
  std::vector<std::size_t> map(c * h * w);
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) map[o++] = (y * w + x) * c + ch;
  return map;
}

std::vector<std::size_t> grid_pad_map(std::size_t h, std::size_t w, std::size_t new_h,
                                      std::size_t new_w) {
  if (new_h < h || new_w < w) throw PadError("grid_pad_map target smaller than grid");
  if (new_h - h >= h || new_w - w >= w)
    throw PadError("patch grid " + std::to_string(h) + "x" + std::to_string(w) +
                   " too small to reflect-pad to " + std::to_string(new_h) + "x" +
                   std::to_string(new_w));
  std::vector<std::size_t> map(new_h * new_w);
  for (std::size_t y = 0; y < new_h; ++y) {
    std::size_t iy = y < h ? y : 2 * h - 2 - y;
    for (std::size_t x = 0; x < new_w; ++x) {
      std::size_t ix = x < w ? x : 2 * w - 2 - x;
      map[y * new_w + x] = iy * w + ix;
    }
  }
  return map;
}

std::vector<std::size_t> grid_crop_map(std::size_t h, std::size_t w, std::size_t new_h,
                                       std::size_t new_w) {
  if (new_h > h || new_w > w)
    throw ShapeError("grid crop " + std::to_string(new_h) + "x" + std::to_string(new_w) +
                     " exceeds grid " + std::to_string(h) + "x" + std::to_string(w));
  std::vector<std::size_t> map(new_h * new_w);
  for (std::size_t y = 0; y < new_h; ++y)
    for (std::size_t x = 0; x < new_w; ++x) map[y * new_w + x] = y * w + x;
  return map;
}

std::vector<std::size_t> head_split_map(std::size_t b, std::size_t l, std::size_t heads,
                                        std::size_t d) {
  std::vector<std::size_t> map(b * l * heads * d);
  std::size_t o = 0;
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t hd = 0; hd < heads; ++hd)
      for (std::size_t li = 0; li < l; ++li)
        for (std::size_t di = 0; di < d; ++di) map[o++] = ((bi * l + li) * heads + hd) * d + di;
  return map;
}

std::vector<std::size_t> head_merge_map(std::size_t b, std::size_t l, std::size_t heads,
                                        std::size_t d) {
  std::vector<std::size_t> map(b * l * heads * d);
  std::size_t o = 0;
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t li = 0; li < l; ++li)
      for (std::size_t hd = 0; hd < heads; ++hd)
        for (std::size_t di = 0; di < d; ++di) map[o++] = ((bi * heads + hd) * l + li) * d + di;
  return map;
}

std::vector<std::size_t> bias_tile_map(std::size_t batch, std::size_t heads, std::size_t side) {
  auto idx = relative_bias_index(side);
  std::size_t len = side * side;
  std::vector<std::size_t> map(batch * heads * len * len);
  std::size_t o = 0;
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t hd = 0; hd < heads; ++hd)
      for (std::size_t ij = 0; ij < len * len; ++ij) map[o++] = idx[ij] * heads + hd;
  return map;
}

}  // namespace s2wat
