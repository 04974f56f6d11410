#pragma once

#include <string>

#include "s2wat/tensor.hpp"

namespace s2wat {

/// Reads a binary PPM (P6, maxval 255) into a [3, H, W] float tensor with
/// values in [0, 1] (v / 255).
Tensor load_ppm(const std::string& path);

/// Writes a [3, H, W] tensor as binary PPM. Values are clamped to [0, 1] and
/// rounded half-up to 8 bits. The write is atomic (temp file + rename).
void save_ppm(const Tensor& img, const std::string& path);

/// In-memory equivalent of save-then-load: clamp and quantize to the 8-bit
/// grid. Used by the multi-round stylization probe.
Tensor quantize_image(const Tensor& img);

/// Writes a [H, W] single-channel map as a grayscale PPM (R=G=B), min-max
/// normalized; constant maps come out black.
void save_grayscale_ppm(const Tensor& map2d, const std::string& path);

}  // namespace s2wat
