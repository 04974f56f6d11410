#include "s2wat/analyze.hpp"

#include <cmath>
#include <filesystem>

#include "s2wat/ppm.hpp"

namespace fs = std::filesystem;

namespace s2wat {

AnalyzeResult analyze_model(const ModelT<float>& model, const Tensor& content,
                            const Tensor& style, const std::string& outdir) {
  fs::create_directories(fs::path(outdir) / "features");
  fs::create_directories(fs::path(outdir) / "attention");
  fs::create_directories(fs::path(outdir) / "similarity");

  if (model.transfer.empty())
    throw ConfigError("analysis needs at least one transfer layer to probe");
  StylizeProbesT<float> probes;
  Tensor stylized = stylize(model, content, style, &probes);
  save_ppm(stylized, (fs::path(outdir) / "stylized.ppm").string());

  AnalyzeResult res;
  const Tensor& c3 = probes.content_stages.stage3;
  const Tensor& s3 = probes.style_stages.stage3;
  res.content_grid_h = c3.dim(0);
  res.content_grid_w = c3.dim(1);
  res.style_grid_h = s3.dim(0);
  res.style_grid_w = s3.dim(1);
  res.cross_attention = probes.first_cross_attention;
  res.heads = res.cross_attention.dim(1);

  // (a) per-channel maps of the deepest encoder features of the content image
  std::size_t ch_count = c3.dim(2);
  std::size_t hw = res.content_grid_h * res.content_grid_w;
  for (std::size_t ch = 0; ch < ch_count; ++ch) {
    auto map = Tensor::zeros({res.content_grid_h, res.content_grid_w});
    for (std::size_t i = 0; i < hw; ++i) map.data()[i] = c3.data()[i * ch_count + ch];
    char name[32];
    std::snprintf(name, sizeof name, "ch%03zu.ppm", ch);
    std::string path = (fs::path(outdir) / "features" / name).string();
    save_grayscale_ppm(map, path);
    res.feature_files.push_back(path);
  }

  // (b) first-layer cross-attention maps per head, plus the row-sum check
  std::size_t nc = res.cross_attention.dim(2);
  std::size_t ns = res.cross_attention.dim(3);
  for (std::size_t h = 0; h < res.heads; ++h) {
    auto map = Tensor::zeros({nc, ns});
    const float* src = res.cross_attention.data() + h * nc * ns;
    for (std::size_t i = 0; i < nc * ns; ++i) map.data()[i] = src[i];
    for (std::size_t i = 0; i < nc; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < ns; ++j) sum += src[i * ns + j];
      res.max_row_sum_error = std::max(res.max_row_sum_error, std::fabs(sum - 1.0));
    }
    char name[32];
    std::snprintf(name, sizeof name, "head%zu.ppm", h);
    std::string path = (fs::path(outdir) / "attention" / name).string();
    save_grayscale_ppm(map, path);
    res.attention_files.push_back(path);
  }

  // (c) similarity maps: four style-grid corners plus the center, averaged
  // over heads and reshaped to the content grid
  std::size_t sh = res.style_grid_h, sw = res.style_grid_w;
  res.probe_points = {{0, 0},
                      {0, sw - 1},
                      {sh - 1, 0},
                      {sh - 1, sw - 1},
                      {sh / 2, sw / 2}};
  for (std::size_t p = 0; p < res.probe_points.size(); ++p) {
    std::size_t j = res.probe_points[p].first * sw + res.probe_points[p].second;
    auto map = Tensor::zeros({res.content_grid_h, res.content_grid_w});
    for (std::size_t i = 0; i < nc; ++i) {
      double acc = 0;
      for (std::size_t h = 0; h < res.heads; ++h)
        acc += res.cross_attention.data()[(h * nc + i) * ns + j];
      map.data()[i] = static_cast<float>(acc / static_cast<double>(res.heads));
    }
    char name[16];
    std::snprintf(name, sizeof name, "p%zu.ppm", p + 1);
    std::string path = (fs::path(outdir) / "similarity" / name).string();
    save_grayscale_ppm(map, path);
    res.similarity_files.push_back(path);
  }
  return res;
}

}  // namespace s2wat
