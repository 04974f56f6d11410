#pragma once

#include <string>
#include <vector>

#include "s2wat/rng.hpp"
#include "s2wat/tensor.hpp"

namespace s2wat {

/// Synthetic [3, size, size] test images: linear color gradients with random
/// orientation, checkerboards, or uniform noise.
Tensor synth_gradient(std::size_t size, Rng& rng);
Tensor synth_checker(std::size_t size, Rng& rng);
Tensor synth_noise(std::size_t size, Rng& rng);

/// Writes `count` images (cycling gradient/checker/noise) named img_000.ppm,
/// img_001.ppm, ... into `dir` (created if missing). Returns the paths.
std::vector<std::string> generate_dataset(const std::string& dir, std::size_t count,
                                          std::size_t size, std::uint64_t seed);

/// Sorted list of *.ppm files in a directory; DataError when empty.
std::vector<std::string> list_ppm_files(const std::string& dir);

/// Bilinear resize so the shorter side equals `target`.
Tensor resize_shorter_side(const Tensor& img, std::size_t target);

/// Random crop to size x size (offsets drawn from rng). The image must be at
/// least that large.
Tensor random_crop(const Tensor& img, std::size_t size, Rng& rng);

}  // namespace s2wat
