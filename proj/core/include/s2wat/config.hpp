#pragma once

#include <string>
#include <vector>

#include "s2wat/loss.hpp"
#include "s2wat/model.hpp"

namespace s2wat {

/// Everything a run needs: model hyperparameters, loss weights, optimizer
/// settings, dataset paths and the seed. Defaults are the desk preset so the
/// whole suite runs in minutes on a laptop.
struct RunConfig {
  ModelConfig model = ModelConfig::desk();
  LossWeights weights;

  double lr = 1e-4;
  std::size_t warmup_steps = 10;
  std::size_t total_iters = 50;
  std::size_t batch_size = 2;
  std::size_t crop = 32;
  std::size_t resize_shorter = 0;  // 0 = no resize
  std::size_t checkpoint_every = 0;  // 0 = final only

  std::string content_dir;
  std::string style_dir;
  std::string out_dir = "runs";

  std::uint64_t seed = 42;
  std::string extractor_mode = "surrogate";  // or a weights-file path via extractor_weights
  std::string extractor_weights;
  std::uint64_t extractor_seed = 7;
  bool attn_merge_softmax = false;

  /// Applies one key=value assignment; throws UsageError on unknown keys or
  /// unparsable values. "preset" expands to a bundle, later keys override.
  void apply(const std::string& key, const std::string& value);

  /// Reads a flat key=value file ('#' comments, blank lines ignored).
  void apply_file(const std::string& path);

  /// S2WAT_SEED, when set, overrides the configured seed.
  void apply_env();

  void validate() const;

  /// Render as the canonical key=value listing (run-header logging).
  std::string to_string() const;
};

std::vector<std::size_t> parse_size_list(const std::string& value, std::size_t expect);

}  // namespace s2wat
