#include "s2wat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "s2wat/ppm.hpp"

namespace fs = std::filesystem;

namespace s2wat {

namespace {

std::array<float, 3> random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
          static_cast<float>(rng.uniform())};
}

}  // namespace

Tensor synth_gradient(std::size_t size, Rng& rng) {
  auto a = random_color(rng);
  auto b = random_color(rng);
  double angle = rng.uniform(0.0, 2.0 * M_PI);
  double dx = std::cos(angle), dy = std::sin(angle);
  auto img = Tensor::zeros({3, size, size});
  double span = static_cast<double>(size - 1);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double t = ((static_cast<double>(x) / span) * dx + (static_cast<double>(y) / span) * dy + 1.0) / 2.0;
      t = std::clamp(t, 0.0, 1.0);
      for (std::size_t c = 0; c < 3; ++c)
        img.data()[c * size * size + y * size + x] =
            static_cast<float>((1.0 - t) * a[c] + t * b[c]);
    }
  return img;
}

Tensor synth_checker(std::size_t size, Rng& rng) {
  auto a = random_color(rng);
  auto b = random_color(rng);
  std::size_t cell = 2 + rng.index(7);  // 2..8 pixels
  auto img = Tensor::zeros({3, size, size});
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      bool odd = ((y / cell) + (x / cell)) % 2;
      const auto& col = odd ? b : a;
      for (std::size_t c = 0; c < 3; ++c)
        img.data()[c * size * size + y * size + x] = col[c];
    }
  return img;
}

Tensor synth_noise(std::size_t size, Rng& rng) {
  auto img = Tensor::zeros({3, size, size});
  for (std::size_t i = 0; i < img.size(); ++i)
    img.data()[i] = static_cast<float>(rng.uniform());
  return img;
}

std::vector<std::string> generate_dataset(const std::string& dir, std::size_t count,
                                          std::size_t size, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng(seed);
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor img;
    switch (i % 3) {
      case 0: img = synth_gradient(size, rng); break;
      case 1: img = synth_checker(size, rng); break;
      default: img = synth_noise(size, rng); break;
    }
    char name[32];
    std::snprintf(name, sizeof name, "img_%03zu.ppm", i);
    std::string path = (fs::path(dir) / name).string();
    save_ppm(img, path);
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::string> list_ppm_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError("no .ppm files in " + dir);
  return paths;
}

Tensor resize_shorter_side(const Tensor& img, std::size_t target) {
  std::size_t h = img.dim(1), w = img.dim(2);
  std::size_t shorter = std::min(h, w);
  if (shorter == target) return img;
  double scale = static_cast<double>(target) / static_cast<double>(shorter);
  std::size_t nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(h * scale)));
  std::size_t nw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(w * scale)));
  if (h == shorter) nh = target;
  if (w == shorter) nw = target;
  auto out = Tensor::zeros({3, nh, nw});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < nh; ++y) {
      double sy = (static_cast<double>(y) + 0.5) / scale - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      std::size_t y0 = static_cast<std::size_t>(sy);
      std::size_t y1 = std::min(y0 + 1, h - 1);
      double fy = sy - static_cast<double>(y0);
      for (std::size_t x = 0; x < nw; ++x) {
        double sx = (static_cast<double>(x) + 0.5) / scale - 0.5;
        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        std::size_t x0 = static_cast<std::size_t>(sx);
        std::size_t x1 = std::min(x0 + 1, w - 1);
        double fx = sx - static_cast<double>(x0);
        auto at = [&](std::size_t yy, std::size_t xx) {
          return static_cast<double>(img.data()[c * h * w + yy * w + xx]);
        };
        double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                   fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
        out.data()[c * nh * nw + y * nw + x] = static_cast<float>(v);
      }
    }
  return out;
}

Tensor random_crop(const Tensor& img, std::size_t size, Rng& rng) {
  std::size_t h = img.dim(1), w = img.dim(2);
  if (h < size || w < size)
    throw DataError("image " + shape_str(img.shape()) + " smaller than crop " +
                    std::to_string(size));
  std::size_t top = rng.index(h - size + 1);
  std::size_t left = rng.index(w - size + 1);
  auto out = Tensor::zeros({3, size, size});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x)
        out.data()[c * size * size + y * size + x] =
            img.data()[c * h * w + (top + y) * w + left + x];
  return out;
}

}  // namespace s2wat
