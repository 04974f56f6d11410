#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2wat/common.hpp"

namespace s2wat {

enum class AttnKind { kMsa, kWmsa, kSpw };

std::string attn_kind_name(AttnKind k);
AttnKind attn_kind_from_name(const std::string& name);

// Closed-form multiply counts for one attention pass over an h x w patch
// grid with channel dim c. The convention counts scalar multiplications in
// matrix products only (softmax, normalization and bias adds excluded):
//   global MSA:            2 (wh)^2 c + 4 wh c^2
//   square window, side m: 2 m^2 wh c + 4 wh c^2
//   strips window, strip m (square branch side 2m):
//                          2 m (w^2 h + w h^2 + 4 m w h) c + 12 wh c^2 + 8 wh c
// The 8 wh c tail is the similarity fusion: two [wh]-batched products of
// 1x c * c x 4 and 1x4 * 4 x c.
std::uint64_t flops_msa(std::uint64_t h, std::uint64_t w, std::uint64_t c);
std::uint64_t flops_wmsa(std::uint64_t h, std::uint64_t w, std::uint64_t m, std::uint64_t c);
std::uint64_t flops_spw(std::uint64_t h, std::uint64_t w, std::uint64_t m, std::uint64_t c);

/// The three terms of the strips form, for diagnostic breakdowns:
/// branch attention, qkv/output projections, similarity fusion.
struct SpwTerms {
  std::uint64_t attention;
  std::uint64_t projections;
  std::uint64_t fusion;
};
SpwTerms spw_flop_terms(std::uint64_t h, std::uint64_t w, std::uint64_t m, std::uint64_t c);

/// Runs the real attention forward (single head, random weights) inside a
/// counting scope and returns the multiplications observed. For kWmsa, m is
/// the window side (must be even); for kSpw, m is the strip width.
std::uint64_t measure_attention(AttnKind kind, std::size_t h, std::size_t w, std::size_t m,
                                std::size_t c, std::uint64_t seed = 1);

struct BenchRow {
  AttnKind kind;
  std::size_t h, w, m, c;
  std::uint64_t analytic;
  std::uint64_t measured;
  double ratio;
};

/// Full grid sweep; kMsa rows are emitted once per (h, w, c) with m = 0.
std::vector<BenchRow> run_bench(const std::vector<std::size_t>& grid_sizes,
                                const std::vector<std::size_t>& window_params,
                                const std::vector<std::size_t>& channel_dims,
                                std::uint64_t seed = 1);

/// CSV with header kind,h,w,M,C,analytic,measured,ratio.
std::string bench_csv(const std::vector<BenchRow>& rows);

/// Least-squares slope of log(count) against log(wh).
double loglog_slope(const std::vector<std::pair<double, double>>& wh_count);

}  // namespace s2wat
