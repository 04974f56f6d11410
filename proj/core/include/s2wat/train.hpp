#pragma once

#include <iosfwd>

#include "s2wat/config.hpp"

namespace s2wat {

/// Warmup-then-inverse-sqrt schedule, pinned as:
///   lr(t) = lr * min(1, t/warmup) * sqrt(warmup / max(t, warmup))
/// so lr ramps linearly to its base value at t = warmup and decays as
/// 1/sqrt(t) afterwards. warmup = 0 disables the schedule entirely.
double warmup_lr(double base_lr, std::size_t step, std::size_t warmup_steps);

struct TrainLogRow {
  std::size_t iter;
  double content, style, id1, id2, total;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  std::string weights_path;
  std::string log_path;
};

/// Builds the configured feature extractor (surrogate or external weights).
FeatureExtractor make_extractor(const RunConfig& cfg);

/// Seed-deterministic training: per iteration samples a content/style batch,
/// random-crops, minimizes the weighted four-term loss with Adam under the
/// warmup schedule, logs one CSV row and writes periodic checkpoints.
/// `console`, when given, receives progress lines.
TrainResult train_run(const RunConfig& cfg, std::ostream* console = nullptr);

}  // namespace s2wat
