#include "s2wat/complexity.hpp"

#include <cmath>
#include <sstream>

#include "s2wat/attention.hpp"

namespace s2wat {

std::string attn_kind_name(AttnKind k) {
  switch (k) {
    case AttnKind::kMsa: return "msa";
    case AttnKind::kWmsa: return "wmsa";
    default: return "spw";
  }
}

AttnKind attn_kind_from_name(const std::string& name) {
  if (name == "msa") return AttnKind::kMsa;
  if (name == "wmsa") return AttnKind::kWmsa;
  if (name == "spw") return AttnKind::kSpw;
  throw UsageError("unknown attention kind \"" + name + "\" (msa|wmsa|spw)");
}

std::uint64_t flops_msa(std::uint64_t h, std::uint64_t w, std::uint64_t c) {
  std::uint64_t wh = w * h;
  return 2 * wh * wh * c + 4 * wh * c * c;
}

std::uint64_t flops_wmsa(std::uint64_t h, std::uint64_t w, std::uint64_t m, std::uint64_t c) {
  std::uint64_t wh = w * h;
  return 2 * m * m * wh * c + 4 * wh * c * c;
}

std::uint64_t flops_spw(std::uint64_t h, std::uint64_t w, std::uint64_t m, std::uint64_t c) {
  auto t = spw_flop_terms(h, w, m, c);
  return t.attention + t.projections + t.fusion;
}

SpwTerms spw_flop_terms(std::uint64_t h, std::uint64_t w, std::uint64_t m, std::uint64_t c) {
  std::uint64_t wh = w * h;
  return {2 * m * (w * w * h + w * h * h + 4 * m * wh) * c, 12 * wh * c * c, 8 * wh * c};
}

namespace {

Tensor random_grid(std::size_t h, std::size_t w, std::size_t c, Rng& rng) {
  auto t = Tensor::zeros({h, w, c});
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

}  // namespace

std::uint64_t measure_attention(AttnKind kind, std::size_t h, std::size_t w, std::size_t m,
                                std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  auto grid = random_grid(h, w, c, rng);
  FlopCounter counter;
  switch (kind) {
    case AttnKind::kMsa: {
      auto params = make_attention<float>(c, 1, rng);
      auto seq = reshape(grid, {h * w, c});
      FlopScope scope(counter);
      global_msa(seq, params);
      break;
    }
    case AttnKind::kWmsa: {
      if (m == 0 || m % 2)
        throw GeometryError("wmsa window side must be even, got " + std::to_string(m));
      auto params = make_attention<float>(c, 1, rng);
      auto bias = make_rel_pos_bias<float>(m, 1, rng);
      auto geometry = square_windows(m / 2, h, w);
      geometry.validate();
      FlopScope scope(counter);
      window_attention(grid, geometry, params, &bias);
      break;
    }
    case AttnKind::kSpw: {
      auto ph = make_attention<float>(c, 1, rng);
      auto pv = make_attention<float>(c, 1, rng);
      auto ps = make_attention<float>(c, 1, rng);
      auto bias = make_rel_pos_bias<float>(2 * m, 1, rng);
      auto gh = horizontal_windows(m, h, w);
      auto gv = vertical_windows(m, h, w);
      auto gs = square_windows(m, h, w);
      gh.validate();
      gv.validate();
      gs.validate();
      FlopScope scope(counter);
      auto zh = window_attention(grid, gh, ph, nullptr);
      auto zv = window_attention(grid, gv, pv, nullptr);
      auto zs = window_attention(grid, gs, ps, &bias);
      attn_merge(reshape(grid, {h * w, c}), reshape(zh, {h * w, c}), reshape(zv, {h * w, c}),
                 reshape(zs, {h * w, c}));
      break;
    }
  }
  return counter.count();
}

std::vector<BenchRow> run_bench(const std::vector<std::size_t>& grid_sizes,
                                const std::vector<std::size_t>& window_params,
                                const std::vector<std::size_t>& channel_dims,
                                std::uint64_t seed) {
  std::vector<BenchRow> rows;
  auto push = [&](AttnKind kind, std::size_t h, std::size_t w, std::size_t m, std::size_t c,
                  std::uint64_t analytic) {
    std::uint64_t measured = measure_attention(kind, h, w, m, c, seed);
    rows.push_back({kind, h, w, m, c, analytic,
                    measured, analytic ? static_cast<double>(measured) / static_cast<double>(analytic) : 0.0});
  };
  for (std::size_t g : grid_sizes)
    for (std::size_t c : channel_dims) {
      push(AttnKind::kMsa, g, g, 0, c, flops_msa(g, g, c));
      for (std::size_t m : window_params) {
        push(AttnKind::kWmsa, g, g, m, c, flops_wmsa(g, g, m, c));
        push(AttnKind::kSpw, g, g, m, c, flops_spw(g, g, m, c));
      }
    }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "kind,h,w,M,C,analytic,measured,ratio\n";
  for (const auto& r : rows) {
    os << attn_kind_name(r.kind) << "," << r.h << "," << r.w << "," << r.m << "," << r.c << ","
       << r.analytic << "," << r.measured << ",";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", r.ratio);
    os << buf << "\n";
  }
  return os.str();
}

double loglog_slope(const std::vector<std::pair<double, double>>& wh_count) {
  if (wh_count.size() < 2) throw ConfigError("slope fit needs at least two points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : wh_count) {
    sx += std::log(x);
    sy += std::log(y);
  }
  double mx = sx / static_cast<double>(wh_count.size());
  double my = sy / static_cast<double>(wh_count.size());
  double num = 0, den = 0;
  for (const auto& [x, y] : wh_count) {
    double dx = std::log(x) - mx;
    num += dx * (std::log(y) - my);
    den += dx * dx;
  }
  return num / den;
}

}  // namespace s2wat
