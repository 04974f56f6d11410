#include <cmath>

#include "doctest.h"
#include "s2wat/complexity.hpp"
#include "test_util.hpp"

using namespace s2wat;

TEST_CASE("analytic formula point values") {
  // evaluated by hand from the closed forms
  CHECK(flops_msa(4, 4, 8) == 8192);          // 2*256*8 + 4*16*64
  CHECK(flops_wmsa(8, 8, 4, 8) == 32768);     // 16384 + 16384
  CHECK(flops_spw(8, 8, 2, 4) == 38912);      // 4*(512+512+512)*4 + 12288 + 2048

  CHECK(flops_msa(0, 4, 0) == 0);  // degenerate channel count

  // doubling wh quadruples the quadratic term of the global form
  std::uint64_t small = flops_msa(4, 4, 8) - 4 * 16 * 64;
  std::uint64_t big = flops_msa(4, 8, 8) - 4 * 32 * 64;
  CHECK(big == 4 * small);

  // a single window covering the grid reduces the window form to the global one
  CHECK(flops_wmsa(8, 8, 8, 16) == flops_msa(8, 8, 16));

  // linear in wh for fixed window and channels
  CHECK(flops_wmsa(8, 16, 4, 8) == 2 * flops_wmsa(8, 8, 4, 8));

  // strips form is symmetric in h and w
  CHECK(flops_spw(6, 10, 2, 8) == flops_spw(10, 6, 2, 8));

  // strips cost sits strictly between window and global attention
  std::uint64_t w = flops_wmsa(64, 64, 8, 32);
  std::uint64_t s = flops_spw(64, 64, 8, 32);
  std::uint64_t m = flops_msa(64, 64, 32);
  CHECK(w < s);
  CHECK(s < m);
}

TEST_CASE("instrumented counts match the analytic forms") {
  for (std::size_t g : {8u, 16u})
    for (std::size_t c : {8u, 16u}) {
      CHECK(measure_attention(AttnKind::kMsa, g, g, 0, c) == flops_msa(g, g, c));
      for (std::size_t m : {2u, 4u}) {
        CHECK(measure_attention(AttnKind::kWmsa, g, g, m, c) == flops_wmsa(g, g, m, c));
        std::uint64_t measured = measure_attention(AttnKind::kSpw, g, g, m, c);
        std::uint64_t analytic = flops_spw(g, g, m, c);
        double rel = std::fabs(static_cast<double>(measured) - static_cast<double>(analytic)) /
                     static_cast<double>(analytic);
        CHECK(rel <= 0.05);
      }
    }
  CHECK_THROWS_AS(measure_attention(AttnKind::kWmsa, 8, 8, 3, 8), GeometryError);
  CHECK_THROWS_AS(measure_attention(AttnKind::kWmsa, 6, 6, 4, 8), GeometryError);
}

TEST_CASE("growth: global attention is quadratic in wh, windowed is linear") {
  std::vector<std::pair<double, double>> msa_points, wmsa_points;
  for (std::size_t g : {8u, 16u, 32u, 64u}) {
    msa_points.push_back({static_cast<double>(g * g),
                          static_cast<double>(measure_attention(AttnKind::kMsa, g, g, 0, 8))});
    wmsa_points.push_back({static_cast<double>(g * g),
                           static_cast<double>(measure_attention(AttnKind::kWmsa, g, g, 4, 8))});
  }
  // slope fit over the dominant-term regime (the quadratic term dwarfs the
  // projection term at these sizes)
  CHECK(loglog_slope(msa_points) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(loglog_slope(wmsa_points) == doctest::Approx(1.0).epsilon(0.05));

  // strips growth is strictly between the two
  std::vector<std::pair<double, double>> spw_points;
  for (std::size_t g : {8u, 16u, 32u, 64u})
    spw_points.push_back({static_cast<double>(g * g),
                          static_cast<double>(measure_attention(AttnKind::kSpw, g, g, 4, 8))});
  double spw_slope = loglog_slope(spw_points);
  CHECK(spw_slope > loglog_slope(wmsa_points));
  CHECK(spw_slope < loglog_slope(msa_points));
}

TEST_CASE("bench rows and CSV layout") {
  auto rows = run_bench({8}, {2}, {8});
  REQUIRE(rows.size() == 3);  // msa once, wmsa and spw per window param
  for (const auto& r : rows) {
    CHECK(r.analytic > 0);
    CHECK(r.measured > 0);
  }
  auto csv = bench_csv(rows);
  CHECK(csv.rfind("kind,h,w,M,C,analytic,measured,ratio\n", 0) == 0);
  CHECK(csv.find("msa,8,8,0,8,") != std::string::npos);
  CHECK(attn_kind_from_name("spw") == AttnKind::kSpw);
  CHECK_THROWS_AS(attn_kind_from_name("bogus"), UsageError);
}
