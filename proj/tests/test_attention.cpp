#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace s2wat;
using namespace s2wat::testing;

namespace {

Tensor identity_matrix(std::size_t n) {
  auto t = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = 1.0f;
  return t;
}

}  // namespace

TEST_CASE("attn_merge closed forms") {
  auto x = TensorD::from({1, 2}, {1, 0});
  auto zero = TensorD::zeros({1, 2});
  auto z = attn_merge(x, zero, zero, zero);
  CHECK(z.data()[0] == doctest::Approx(1.0));
  CHECK(z.data()[1] == doctest::Approx(0.0));

  // all candidates equal a unit vector: four unit weights
  double inv = 1.0 / std::sqrt(2.0);
  auto u = TensorD::from({1, 2}, {inv, inv});
  auto z4 = attn_merge(u, u, u, u);
  CHECK(z4.data()[0] == doctest::Approx(4.0 * inv));
  CHECK(z4.data()[1] == doctest::Approx(4.0 * inv));

  CHECK_THROWS_AS(attn_merge(x, zero, zero, TensorD::zeros({2, 2})), ShapeError);
}

TEST_CASE("attn_merge matches the loop oracle to 1e-10 on float64") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n = 2 + rng.index(4), d = 3 + rng.index(4);
    auto x = random_tensor<double>({n, d}, rng);
    auto a = random_tensor<double>({n, d}, rng);
    auto b = random_tensor<double>({n, d}, rng);
    auto c = random_tensor<double>({n, d}, rng);
    auto z = attn_merge(x, a, b, c);
    auto expect = attn_merge_oracle(x, a, b, c);
    for (std::size_t i = 0; i < z.size(); ++i)
      CHECK(std::fabs(z.data()[i] - expect[i]) < 1e-10);
  }
}

TEST_CASE("attn_merge softmax variant normalizes the weights") {
  auto x = TensorD::from({1, 1}, {2.0});
  auto zero = TensorD::zeros({1, 1});
  // raw weights (4, 0, 0, 0) -> softmax ~ (0.947, 0.0177, ...), z = w0 * 2
  auto z = attn_merge(x, zero, zero, zero, true);
  double e4 = std::exp(4.0);
  CHECK(z.data()[0] == doctest::Approx(2.0 * e4 / (e4 + 3.0)));
}

TEST_CASE("window attention bias preconditions") {
  Rng rng(32);
  auto grid = random_tensor<float>({4, 4, 4}, rng);
  auto p = make_attention<float>(4, 2, rng);
  auto bias = make_rel_pos_bias<float>(2, 2, rng);
  CHECK_THROWS_AS(window_attention(grid, horizontal_windows(1, 4, 4), p, &bias), ConfigError);
  CHECK_THROWS_AS(window_attention(grid, square_windows(1, 4, 4), p, nullptr), ConfigError);
  auto wrong_side = make_rel_pos_bias<float>(4, 2, rng);
  CHECK_THROWS_AS(window_attention(grid, square_windows(1, 4, 4), p, &wrong_side), ConfigError);
}

TEST_CASE("identical value rows make attention a no-op before projection") {
  Rng rng(33);
  std::size_t c = 4;
  auto p = make_attention<float>(c, 2, rng);
  // zero the value projection and set its bias: every V row becomes bias_v
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) p.qkv.w.data()[i * 3 * c + 2 * c + j] = 0.0f;
  float vrow[4] = {0.3f, -1.2f, 0.7f, 2.0f};
  for (std::size_t j = 0; j < c; ++j) p.qkv.b.data()[2 * c + j] = vrow[j];
  p.proj.w = identity_matrix(c);
  p.proj.b = Tensor::zeros({c});

  auto grid = random_tensor<float>({4, 4, c}, rng);
  auto out = window_attention(grid, horizontal_windows(2, 4, 4), p, nullptr);
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t j = 0; j < c; ++j)
      CHECK(out.data()[t * c + j] == doctest::Approx(vrow[j]).epsilon(1e-5));
}

TEST_CASE("zero queries with zero bias average the value rows uniformly") {
  Rng rng(34);
  std::size_t c = 4;
  auto p = make_attention<float>(c, 1, rng);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) p.qkv.w.data()[i * 3 * c + j] = 0.0f;  // q columns
  for (std::size_t j = 0; j < c; ++j) p.qkv.b.data()[j] = 0.0f;
  p.proj.w = identity_matrix(c);
  p.proj.b = Tensor::zeros({c});
  auto bias = make_rel_pos_bias<float>(2, 1, rng);
  for (std::size_t i = 0; i < bias.table.size(); ++i) bias.table.data()[i] = 0.0f;

  auto grid = random_tensor<float>({2, 2, c}, rng);
  auto g = square_windows(1, 2, 2);
  auto out = window_attention(grid, g, p, &bias);

  // manual uniform mean of the projected V rows over the single window
  for (std::size_t j = 0; j < c; ++j) {
    double mean = 0;
    for (std::size_t t = 0; t < 4; ++t) {
      double v = p.qkv.b.data()[2 * c + j];
      for (std::size_t i = 0; i < c; ++i)
        v += grid.data()[t * c + i] * p.qkv.w.data()[i * 3 * c + 2 * c + j];
      mean += v;
    }
    mean /= 4.0;
    for (std::size_t t = 0; t < 4; ++t)
      CHECK(out.data()[t * c + j] == doctest::Approx(mean).epsilon(1e-5));
  }
}

TEST_CASE("window attention matches the dense masked oracle") {
  Rng rng(35);
  for (int rep = 0; rep < 6; ++rep) {
    std::size_t strip = 1 + rng.index(2);
    std::size_t gh = 2 * strip * (1 + rng.index(2));
    std::size_t gw = 2 * strip * (1 + rng.index(2));
    std::size_t heads = 1 + rng.index(2);
    std::size_t c = heads * (2 + rng.index(3));
    auto grid = random_tensor<float>({gh, gw, c}, rng);
    auto p = make_attention<float>(c, heads, rng);
    auto bias = make_rel_pos_bias<float>(2 * strip, heads, rng);

    for (auto kind : {WindowKind::kHorizontal, WindowKind::kVertical, WindowKind::kSquare}) {
      WindowGeometry g{kind, strip, gh, gw};
      bool square = kind == WindowKind::kSquare;
      auto got = window_attention(grid, g, p, square ? &bias : nullptr);
      auto expect = dense_window_attention(grid, g, p, square ? &bias : nullptr);
      for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(std::fabs(static_cast<double>(got.data()[i]) - expect[i]) < 1e-6);
    }
  }
}

TEST_CASE("attention maps are row-stochastic") {
  Rng rng(36);
  auto grid = random_tensor<float>({4, 4, 6}, rng);
  auto p = make_attention<float>(6, 2, rng);
  auto bias = make_rel_pos_bias<float>(2, 2, rng);
  Tensor attn;
  window_attention(grid, square_windows(1, 4, 4), p, &bias, &attn);
  REQUIRE(attn.shape() == Shape{4, 2, 4, 4});
  std::size_t rows = attn.size() / attn.dim(3);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0;
    for (std::size_t j = 0; j < attn.dim(3); ++j) sum += attn.data()[r * attn.dim(3) + j];
    CHECK(std::fabs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("permutation inside a window permutes outputs identically") {
  Rng rng(37);
  std::size_t c = 4;
  auto grid = random_tensor<float>({4, 4, c}, rng);
  auto p = make_attention<float>(c, 2, rng);

  // swap two tokens of the first horizontal strip window (rows 0..1)
  auto swapped = grid.value_copy();
  for (std::size_t i = 0; i < c; ++i)
    std::swap(swapped.data()[(0 * 4 + 0) * c + i], swapped.data()[(1 * 4 + 3) * c + i]);

  auto g = horizontal_windows(2, 4, 4);
  auto out = window_attention(grid, g, p, nullptr);
  auto out_swapped = window_attention(swapped, g, p, nullptr);
  auto expect = out.value_copy();
  for (std::size_t i = 0; i < c; ++i)
    std::swap(expect.data()[(0 * 4 + 0) * c + i], expect.data()[(1 * 4 + 3) * c + i]);
  CHECK(max_abs_diff(out_swapped, expect) < 1e-6);
}

TEST_CASE("global MSA basics") {
  Rng rng(38);
  auto p = make_attention<float>(4, 2, rng);

  // single token: softmax over one key is 1, output is proj(V)
  auto one = random_tensor<float>({1, 4}, rng);
  auto out = global_msa(one, p);
  REQUIRE(out.shape() == Shape{1, 4});
  for (std::size_t j = 0; j < 4; ++j) {
    double v = p.qkv.b.data()[8 + j];
    for (std::size_t i = 0; i < 4; ++i)
      v += one.data()[i] * p.qkv.w.data()[i * 12 + 8 + j];
    double y = p.proj.b.data()[j];
    // context equals v itself; project it
    // (recompute v per output channel e)
    (void)v;
    for (std::size_t e = 0; e < 4; ++e) {
      double ve = p.qkv.b.data()[8 + e];
      for (std::size_t i = 0; i < 4; ++i)
        ve += one.data()[i] * p.qkv.w.data()[i * 12 + 8 + e];
      y += ve * p.proj.w.data()[e * 4 + j];
    }
    CHECK(out.data()[j] == doctest::Approx(y).epsilon(1e-5));
  }

  // equivalence: one square window covering the whole grid, zero bias
  auto grid = random_tensor<float>({4, 4, 4}, rng);
  auto bias = make_rel_pos_bias<float>(4, 2, rng);
  for (std::size_t i = 0; i < bias.table.size(); ++i) bias.table.data()[i] = 0.0f;
  auto via_window = window_attention(grid, square_windows(2, 4, 4), p, &bias);
  auto via_global = global_msa(reshape(grid, {16, 4}), p);
  CHECK(max_abs_diff(reshape(via_window, {16, 4}), via_global) < 1e-6);

  Tensor attn;
  global_msa(reshape(grid, {16, 4}), p, &attn);
  for (std::size_t r = 0; r < attn.size() / 16; ++r) {
    double sum = 0;
    for (std::size_t j = 0; j < 16; ++j) sum += attn.data()[r * 16 + j];
    CHECK(std::fabs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("spw block keeps shape and closed form under zeroed projections") {
  Rng rng(39);
  auto blk = make_spw_block<double>(4, 2, 1, rng);
  auto grid = random_tensor<double>({4, 4, 4}, rng);
  auto out = spw_block(grid, blk, 1);
  CHECK(out.shape() == grid.shape());
  CHECK(out.all_finite());

  // zero all projections, bias table and MLP: output collapses to
  // |LN(z)_i|^2 * LN(z)_i + z_i per token.
  auto zeroed = make_spw_block<double>(4, 2, 1, rng);
  for (auto* lin : {&zeroed.horiz.qkv, &zeroed.horiz.proj, &zeroed.vert.qkv, &zeroed.vert.proj,
                    &zeroed.square.qkv, &zeroed.square.proj, &zeroed.mlp_fc1, &zeroed.mlp_fc2}) {
    for (std::size_t i = 0; i < lin->w.size(); ++i) lin->w.data()[i] = 0.0;
    for (std::size_t i = 0; i < lin->b.size(); ++i) lin->b.data()[i] = 0.0;
  }
  for (std::size_t i = 0; i < zeroed.bias.table.size(); ++i) zeroed.bias.table.data()[i] = 0.0;

  auto got = spw_block(grid, zeroed, 1);
  auto u = layer_norm(grid, zeroed.ln1.gamma, zeroed.ln1.beta);
  for (std::size_t t = 0; t < 16; ++t) {
    double norm2 = 0;
    for (std::size_t j = 0; j < 4; ++j) norm2 += u.data()[t * 4 + j] * u.data()[t * 4 + j];
    for (std::size_t j = 0; j < 4; ++j) {
      double expect = norm2 * u.data()[t * 4 + j] + grid.data()[t * 4 + j];
      CHECK(got.data()[t * 4 + j] == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("spw block gradient check at 4x4, strip 1, dim 4") {
  Rng rng(40);
  auto blk = make_spw_block<double>(4, 2, 1, rng);
  auto grid = random_tensor<double>({4, 4, 4}, rng);
  auto r = random_tensor<double>({4, 4, 4}, rng);

  std::vector<TensorD> inputs{grid,          blk.ln1.gamma, blk.ln1.beta,  blk.ln2.gamma,
                              blk.ln2.beta,  blk.horiz.qkv.w, blk.horiz.qkv.b, blk.horiz.proj.w,
                              blk.horiz.proj.b, blk.vert.qkv.w, blk.vert.qkv.b, blk.vert.proj.w,
                              blk.vert.proj.b, blk.square.qkv.w, blk.square.qkv.b,
                              blk.square.proj.w, blk.square.proj.b, blk.bias.table,
                              blk.mlp_fc1.w, blk.mlp_fc1.b, blk.mlp_fc2.w, blk.mlp_fc2.b};
  GradCheckOptions opts;
  opts.max_coords_per_tensor = 24;
  double err = check_gradients(
      [&] { return weighted_sum(spw_block(grid, blk, 1), r); }, inputs, opts);
  CHECK(err < 1e-4);
}

TEST_CASE("spw block propagates geometry errors") {
  Rng rng(41);
  auto blk = make_spw_block<float>(4, 2, 2, rng);
  auto grid = random_tensor<float>({6, 6, 4}, rng);  // not divisible by 2*strip
  CHECK_THROWS_AS(spw_block(grid, blk, 2), GeometryError);
}

TEST_CASE("fusion and branch ablation switches") {
  Rng rng(42);
  auto grid = random_tensor<float>({4, 4, 4}, rng);
  auto blk = make_spw_block<float>(4, 2, 1, rng, FusionMode::kConcat);

  auto run = [&](FusionMode fusion, BranchMode branches) {
    return spw_block(grid, blk, SpwOptions{1, fusion, branches, false});
  };
  auto merged = run(FusionMode::kAttnMerge, BranchMode::kAll);
  auto summed = run(FusionMode::kSum, BranchMode::kAll);
  auto concatenated = run(FusionMode::kConcat, BranchMode::kAll);
  auto horizontal_only = run(FusionMode::kAttnMerge, BranchMode::kHorizontal);
  auto square_only = run(FusionMode::kAttnMerge, BranchMode::kSquare);
  for (const auto& t : {merged, summed, concatenated, horizontal_only, square_only}) {
    CHECK(t.shape() == grid.shape());
    CHECK(t.all_finite());
  }
  CHECK_FALSE(bit_identical(merged, summed));
  CHECK_FALSE(bit_identical(merged, concatenated));
  CHECK_FALSE(bit_identical(merged, horizontal_only));
  CHECK_FALSE(bit_identical(horizontal_only, square_only));

  // sum fusion is the plain total of the normalized input and branch outputs
  auto u = layer_norm(grid, blk.ln1.gamma, blk.ln1.beta);
  auto zh = window_attention(u, horizontal_windows(1, 4, 4), blk.horiz, nullptr);
  auto zv = window_attention(u, vertical_windows(1, 4, 4), blk.vert, nullptr);
  auto zs = window_attention(u, square_windows(1, 4, 4), blk.square, &blk.bias);
  auto zt = add(add(add(u, zh), add(zv, zs)), grid);
  auto m = linear(layer_norm(zt, blk.ln2.gamma, blk.ln2.beta), blk.mlp_fc1);
  m = linear(gelu(m), blk.mlp_fc2);
  CHECK(max_abs_diff(summed, add(m, zt)) < 1e-6);

  // blocks built without the concat projection reject concat fusion
  auto plain = make_spw_block<float>(4, 2, 1, rng);
  CHECK_THROWS_AS(
      spw_block(grid, plain, SpwOptions{1, FusionMode::kConcat, BranchMode::kAll, false}),
      ConfigError);
}
