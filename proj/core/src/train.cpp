#include "s2wat/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "s2wat/ppm.hpp"
#include "s2wat/synth.hpp"
#include "s2wat/weights_io.hpp"

namespace fs = std::filesystem;

namespace s2wat {

double warmup_lr(double base_lr, std::size_t step, std::size_t warmup_steps) {
  if (warmup_steps == 0) return base_lr;
  double t = static_cast<double>(step);
  double w = static_cast<double>(warmup_steps);
  double ramp = std::min(1.0, t / w);
  double decay = std::sqrt(w / std::max(t, w));
  return base_lr * ramp * decay;
}

FeatureExtractor make_extractor(const RunConfig& cfg) {
  if (cfg.extractor_mode == "surrogate") return FeatureExtractor::surrogate(cfg.extractor_seed);

  // External weights: conv chain named vgg.block{k}.conv{j}.{w,b}.
  auto store = load_weights(cfg.extractor_weights);
  std::vector<std::vector<ConvT<float>>> blocks;
  for (std::size_t k = 1;; ++k) {
    std::vector<ConvT<float>> block;
    for (std::size_t j = 1;; ++j) {
      std::string base = "vgg.block" + std::to_string(k) + ".conv" + std::to_string(j);
      Tensor* w = store.find(base + ".w");
      Tensor* b = store.find(base + ".b");
      if (!w) break;
      if (!b) throw DataError(cfg.extractor_weights + ": missing " + base + ".b");
      if (w->rank() != 4 || w->dim(2) != 3 || w->dim(3) != 3)
        throw DataError(cfg.extractor_weights + ": " + base + ".w must be [Cout,Cin,3,3]");
      Tensor wt = w->value_copy();
      Tensor bt = b->value_copy();
      block.push_back({wt, bt});
    }
    if (block.empty()) break;
    blocks.push_back(std::move(block));
  }
  return FeatureExtractor::from_blocks(std::move(blocks));
}

namespace {

class ImageCache {
 public:
  const Tensor& get(const std::string& path) {
    auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(path, load_ppm(path)).first->second;
  }

 private:
  std::map<std::string, Tensor> cache_;
};

Tensor sample_image(const std::vector<std::string>& paths, ImageCache& cache,
                    const RunConfig& cfg, Rng& rng) {
  const std::string& path = paths[rng.index(paths.size())];
  Tensor img = cache.get(path);
  if (cfg.resize_shorter > 0 && std::min(img.dim(1), img.dim(2)) != cfg.resize_shorter)
    img = resize_shorter_side(img, cfg.resize_shorter);
  return random_crop(img, cfg.crop, rng);
}

}  // namespace

TrainResult train_run(const RunConfig& cfg, std::ostream* console) {
  cfg.validate();
  if (cfg.content_dir.empty() || cfg.style_dir.empty())
    throw DataError("training needs content_dir and style_dir");
  auto content_paths = list_ppm_files(cfg.content_dir);
  auto style_paths = list_ppm_files(cfg.style_dir);

  auto fx = make_extractor(cfg);
  auto model = make_model<float>(cfg.model, cfg.seed);
  StylizeFn<float> apply = [&](const Tensor& c, const Tensor& s) { return stylize(model, c, s); };

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream hdr((fs::path(cfg.out_dir) / "run_config.txt").string());
    hdr << cfg.to_string();
  }

  AdamT<float> adam;
  Rng data_rng(cfg.seed + 1);
  ImageCache cache;
  TrainResult result;
  result.log_path = (fs::path(cfg.out_dir) / "train_log.csv").string();
  std::ofstream log(result.log_path);
  if (!log) throw DataError("cannot open " + result.log_path);
  log << "# lr(t) = lr*min(1,t/warmup)*sqrt(warmup/max(t,warmup)); lr=" << cfg.lr
      << " warmup=" << cfg.warmup_steps << "\n";
  log << "iter,content,style,id1,id2,total\n";
  log.precision(9);

  for (std::size_t t = 1; t <= cfg.total_iters; ++t) {
    Tape tape;
    TapeScopeT<float> scope(tape);

    Tensor batch_loss = Tensor::scalar(0.0f);
    double sum_c = 0, sum_s = 0, sum_i1 = 0, sum_i2 = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      Tensor content = sample_image(content_paths, cache, cfg, data_rng);
      Tensor style = sample_image(style_paths, cache, cfg, data_rng);
      Tensor stylized = stylize(model, content, style);
      Tensor lc = content_loss(fx, stylized, content);
      Tensor ls = style_loss(fx, stylized, style);
      auto [li1, li2] = identity_losses<float>(apply, fx, content, style);
      batch_loss = add(batch_loss, total_loss(lc, ls, li1, li2, cfg.weights));
      sum_c += lc.item();
      sum_s += ls.item();
      sum_i1 += li1.item();
      sum_i2 += li2.item();
    }
    batch_loss = scalar_mul(batch_loss, 1.0f / static_cast<float>(cfg.batch_size));

    double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    TrainLogRow row{t, sum_c * inv_b, sum_s * inv_b, sum_i1 * inv_b, sum_i2 * inv_b, 0.0};
    row.total = cfg.weights.content * row.content + cfg.weights.style * row.style +
                cfg.weights.id1 * row.id1 + cfg.weights.id2 * row.id2;
    if (!std::isfinite(row.total) || !batch_loss.all_finite())
      throw NumericError("non-finite loss at iteration " + std::to_string(t) +
                         " (content=" + std::to_string(row.content) +
                         ", style=" + std::to_string(row.style) + ")");

    tape.backward(batch_loss);
    adam.step(model.params, warmup_lr(cfg.lr, t, cfg.warmup_steps));
    model.params.zero_grads();

    log << t << "," << row.content << "," << row.style << "," << row.id1 << "," << row.id2 << ","
        << row.total << "\n";
    result.log.push_back(row);
    if (console && (t == 1 || t % 10 == 0 || t == cfg.total_iters))
      (*console) << "iter " << t << " total " << row.total << "\n";

    if (cfg.checkpoint_every && t % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt-%06zu.s2wt", t);
      save_weights(model.params, (fs::path(cfg.out_dir) / name).string());
    }
  }

  result.weights_path = (fs::path(cfg.out_dir) / "final.s2wt").string();
  save_weights(model.params, result.weights_path);
  return result;
}

}  // namespace s2wat
