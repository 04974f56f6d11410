#include "s2wat/ppm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace s2wat {

namespace {

// Skips whitespace and '#' comments between header tokens.
void skip_separators(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      in.get();
    } else {
      return;
    }
  }
}

unsigned long read_header_number(std::istream& in, const std::string& path) {
  skip_separators(in);
  unsigned long v = 0;
  if (!(in >> v)) throw DataError("malformed PPM header in " + path);
  return v;
}

void atomic_write(const std::string& path, const std::string& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot rename " + tmp + " to " + path);
}

std::uint8_t quantize(float v) {
  float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<std::uint8_t>(std::floor(c * 255.0f + 0.5f));
}

}  // namespace

Tensor load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6')
    throw DataError(path + ": not a binary PPM (expected magic P6)");
  unsigned long w = read_header_number(in, path);
  unsigned long h = read_header_number(in, path);
  unsigned long maxval = read_header_number(in, path);
  if (w == 0 || h == 0) throw DataError(path + ": empty image");
  if (maxval != 255) throw DataError(path + ": unsupported maxval " + std::to_string(maxval));
  in.get();  // single separator byte after maxval
  std::vector<unsigned char> raw(w * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw DataError(path + ": truncated pixel data");

  auto img = Tensor::zeros({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.data()[c * h * w + y * w + x] =
            static_cast<float>(raw[(y * w + x) * 3 + c]) / 255.0f;
  return img;
}

void save_ppm(const Tensor& img, const std::string& path) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw ShapeError("save_ppm expects [3, H, W], got " + shape_str(img.shape()));
  std::size_t h = img.dim(1), w = img.dim(2);
  std::string bytes = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  bytes.reserve(bytes.size() + w * h * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        bytes.push_back(static_cast<char>(quantize(img.data()[c * h * w + y * w + x])));
  atomic_write(path, bytes);
}

Tensor quantize_image(const Tensor& img) {
  auto out = Tensor::zeros(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i)
    out.data()[i] = static_cast<float>(quantize(img.data()[i])) / 255.0f;
  return out;
}

void save_grayscale_ppm(const Tensor& map2d, const std::string& path) {
  if (map2d.rank() != 2) throw ShapeError("save_grayscale_ppm expects [H, W]");
  std::size_t h = map2d.dim(0), w = map2d.dim(1);
  float lo = map2d.data()[0], hi = map2d.data()[0];
  for (std::size_t i = 0; i < map2d.size(); ++i) {
    lo = std::min(lo, map2d.data()[i]);
    hi = std::max(hi, map2d.data()[i]);
  }
  float span = hi - lo;
  auto rgb = Tensor::zeros({3, h, w});
  for (std::size_t i = 0; i < map2d.size(); ++i) {
    float v = span > 0 ? (map2d.data()[i] - lo) / span : 0.0f;
    rgb.data()[i] = v;
    rgb.data()[h * w + i] = v;
    rgb.data()[2 * h * w + i] = v;
  }
  save_ppm(rgb, path);
}

}  // namespace s2wat
