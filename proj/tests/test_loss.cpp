#include <cmath>

#include "doctest.h"
#include "s2wat/loss.hpp"
#include "s2wat/model.hpp"
#include "test_util.hpp"

using namespace s2wat;
using namespace s2wat::testing;

namespace {

// Plain-loop statistics used as oracles: mean / sqrt(var + eps) per channel.
struct ChannelStats {
  std::vector<double> mean, sd;
};

template <class T>
ChannelStats stats_oracle(const TensorT<T>& chw) {
  std::size_t c = chw.dim(0), hw = chw.dim(1) * chw.dim(2);
  ChannelStats s;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu = 0;
    for (std::size_t i = 0; i < hw; ++i) mu += chw.data()[ch * hw + i];
    mu /= static_cast<double>(hw);
    double var = 0;
    for (std::size_t i = 0; i < hw; ++i) {
      double d = chw.data()[ch * hw + i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(hw);
    s.mean.push_back(mu);
    s.sd.push_back(std::sqrt(var + kStatEps));
  }
  return s;
}

template <class T>
double mse_oracle(const TensorT<T>& a, const TensorT<T>& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("extractor determinism and tap extents") {
  auto fx = FeatureExtractorT<float>::surrogate(7);
  Rng rng(71);
  auto img = random_tensor<float>({3, 64, 64}, rng, 0, 1);
  auto taps1 = fx.extract(img, kStyleTapsMetric);
  auto taps2 = fx.extract(img, kStyleTapsMetric);
  for (const auto& [name, t] : taps1) CHECK(bit_identical(t, taps2.at(name)));

  CHECK(taps1.at("relu1_1").dim(1) == 64);
  CHECK(taps1.at("relu2_1").dim(1) == 32);
  CHECK(taps1.at("relu3_1").dim(1) == 16);
  CHECK(taps1.at("relu4_1").dim(1) == 8);  // three poolings before relu4_1
  CHECK(taps1.at("relu5_1").dim(1) == 4);

  CHECK_THROWS_AS(fx.extract(img, {"relu6_1"}), ConfigError);
  CHECK_THROWS_AS(fx.extract(random_tensor<float>({3, 16, 16}, rng), {"relu4_1"}), DataError);
}

TEST_CASE("surrogate features distinguish distinct random images") {
  auto fx = FeatureExtractorT<float>::surrogate(7);
  Rng rng(72);
  auto a = random_tensor<float>({3, 32, 32}, rng, 0, 1);
  auto b = random_tensor<float>({3, 32, 32}, rng, 0, 1);
  auto fa = fx.extract(a, {"relu4_1"});
  auto fb = fx.extract(b, {"relu4_1"});
  double gap = 0;
  for (std::size_t i = 0; i < fa.at("relu4_1").size(); ++i) {
    double d = fa.at("relu4_1").data()[i] - fb.at("relu4_1").data()[i];
    gap += d * d;
  }
  CHECK(gap > 0.0);
}

TEST_CASE("channel statistics match the loop oracle") {
  Rng rng(73);
  auto f = random_tensor<double>({4, 6, 5}, rng);
  auto mu = channel_mean(f);
  auto sd = channel_std(f);
  auto expect = stats_oracle(f);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(mu.data()[c] == doctest::Approx(expect.mean[c]).epsilon(1e-12));
    CHECK(sd.data()[c] == doctest::Approx(expect.sd[c]).epsilon(1e-12));
  }
}

TEST_CASE("normalization is invariant to positive per-channel affine maps") {
  Rng rng(74);
  auto f = random_tensor<double>({3, 8, 8}, rng, -2, 2);
  auto normed = channel_normalize(f);
  auto scaled = f.value_copy();
  double a[3] = {0.5, 1.7, 2.0}, b[3] = {-1.0, 0.3, 4.0};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 64; ++i)
      scaled.data()[c * 64 + i] = a[c] * scaled.data()[c * 64 + i] + b[c];
  auto normed2 = channel_normalize(scaled);
  CHECK(max_abs_diff(normed, normed2) < 1e-3);  // exact up to the eps guard
}

TEST_CASE("content loss: zero on identical inputs, matches loop oracle") {
  auto fx = FeatureExtractorT<double>::surrogate(7);
  Rng rng(75);
  auto img = random_tensor<double>({3, 32, 32}, rng, 0, 1);
  CHECK(content_loss(fx, img, img).item() == doctest::Approx(0.0));

  auto other = random_tensor<double>({3, 32, 32}, rng, 0, 1);
  double got = content_loss(fx, img, other).item();
  CHECK(got >= 0.0);

  // loop oracle over the same taps
  double expect = 0;
  auto fa = fx.extract(img, kContentTaps);
  auto fb = fx.extract(other, kContentTaps);
  for (const auto& tap : kContentTaps) {
    const auto& ta = fa.at(tap);
    const auto& tb = fb.at(tap);
    auto sa = stats_oracle(ta);
    auto sb = stats_oracle(tb);
    std::size_t c = ta.dim(0), hw = ta.dim(1) * ta.dim(2);
    double acc = 0;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i) {
        double na = (ta.data()[ch * hw + i] - sa.mean[ch]) / sa.sd[ch];
        double nb = (tb.data()[ch * hw + i] - sb.mean[ch]) / sb.sd[ch];
        acc += (na - nb) * (na - nb);
      }
    expect += acc / static_cast<double>(c * hw);
  }
  CHECK(got == doctest::Approx(expect).epsilon(1e-6));

  CHECK_THROWS_AS(content_loss(fx, img, random_tensor<double>({3, 32, 34}, rng)), ShapeError);
}

TEST_CASE("style loss: zero on identical inputs, permutation-invariant stats, oracle") {
  auto fx = FeatureExtractorT<double>::surrogate(7);
  Rng rng(76);
  auto img = random_tensor<double>({3, 32, 32}, rng, 0, 1);
  CHECK(style_loss(fx, img, img).item() == doctest::Approx(0.0));

  // spatially permuting a feature map leaves mean/std unchanged
  auto f = random_tensor<double>({3, 4, 4}, rng);
  auto perm = f.value_copy();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 8; ++i)
      std::swap(perm.data()[c * 16 + i], perm.data()[c * 16 + 15 - i]);
  CHECK(max_abs_diff(channel_mean(f), channel_mean(perm)) < 1e-12);
  CHECK(max_abs_diff(channel_std(f), channel_std(perm)) < 1e-12);

  auto other = random_tensor<double>({3, 32, 32}, rng, 0, 1);
  double got = style_loss(fx, img, other).item();
  double expect = 0;
  auto fa = fx.extract(img, kStyleTapsTrain);
  auto fb = fx.extract(other, kStyleTapsTrain);
  for (const auto& tap : kStyleTapsTrain) {
    auto sa = stats_oracle(fa.at(tap));
    auto sb = stats_oracle(fb.at(tap));
    double m = 0, s = 0;
    for (std::size_t c = 0; c < sa.mean.size(); ++c) {
      m += (sa.mean[c] - sb.mean[c]) * (sa.mean[c] - sb.mean[c]);
      s += (sa.sd[c] - sb.sd[c]) * (sa.sd[c] - sb.sd[c]);
    }
    expect += (m + s) / static_cast<double>(sa.mean.size());
  }
  CHECK(got == doctest::Approx(expect).epsilon(1e-6));

  // metric mode includes relu1_1, so it sees a strictly larger tap set
  double metric = style_loss(fx, img, other, true).item();
  CHECK(metric >= got);
}

TEST_CASE("identity losses: identity model, constant model, loop oracle") {
  auto fx = FeatureExtractorT<double>::surrogate(7);
  Rng rng(77);
  auto c = random_tensor<double>({3, 32, 32}, rng, 0, 1);
  auto s = random_tensor<double>({3, 32, 32}, rng, 0, 1);

  StylizeFn<double> identity = [](const TensorD& a, const TensorD&) { return a; };
  auto [z1, z2] = identity_losses<double>(identity, fx, c, s);
  CHECK(z1.item() == doctest::Approx(0.0));
  CHECK(z2.item() == doctest::Approx(0.0));

  StylizeFn<double> constant = [](const TensorD& a, const TensorD&) {
    return TensorD::full(a.shape(), 0.25);
  };
  auto [p1, p2] = identity_losses<double>(constant, fx, c, s);
  CHECK(p1.item() > 0.0);
  CHECK(p2.item() > 0.0);

  // fixed affine-mix model against a loop oracle
  StylizeFn<double> mix = [](const TensorD& a, const TensorD& b) {
    return add(scalar_mul(a, 0.6), scalar_mul(b, 0.3));
  };
  auto [m1, m2] = identity_losses<double>(mix, fx, c, s);
  auto icc = mix(c, c);
  auto iss = mix(s, s);
  CHECK(m1.item() == doctest::Approx(mse_oracle(icc, c) + mse_oracle(iss, s)).epsilon(1e-9));
  double expect2 = 0;
  auto fcc = fx.extract(icc, kIdentityTaps);
  auto fc = fx.extract(c, kIdentityTaps);
  auto fss = fx.extract(iss, kIdentityTaps);
  auto fs = fx.extract(s, kIdentityTaps);
  for (const auto& tap : kIdentityTaps)
    expect2 += mse_oracle(fcc.at(tap), fc.at(tap)) + mse_oracle(fss.at(tap), fs.at(tap));
  CHECK(m2.item() == doctest::Approx(expect2).epsilon(1e-9));
}

TEST_CASE("total loss: weights, linearity, zero") {
  LossWeights w;  // 2, 3, 50, 1
  auto one = TensorD::scalar(1.0);
  auto zero = TensorD::scalar(0.0);
  CHECK(total_loss(one, one, one, one, w).item() == doctest::Approx(56.0));
  CHECK(total_loss(zero, zero, zero, zero, w).item() == doctest::Approx(0.0));
  // linear in each part
  auto two = TensorD::scalar(2.0);
  double base = total_loss(one, one, one, one, w).item();
  CHECK(total_loss(two, one, one, one, w).item() - base == doctest::Approx(2.0));
  CHECK(total_loss(one, two, one, one, w).item() - base == doctest::Approx(3.0));
  CHECK(total_loss(one, one, two, one, w).item() - base == doctest::Approx(50.0));
  CHECK(total_loss(one, one, one, two, w).item() - base == doctest::Approx(1.0));
}

TEST_CASE("losses are differentiable through a tiny model slice") {
  auto fx = FeatureExtractorT<double>::surrogate(7);
  Rng rng(78);
  auto stylized = random_tensor<double>({3, 32, 32}, rng, 0.1, 0.9);
  auto content = random_tensor<double>({3, 32, 32}, rng, 0.1, 0.9);
  auto style = random_tensor<double>({3, 32, 32}, rng, 0.1, 0.9);
  LossWeights w;

  GradCheckOptions opts;
  opts.max_coords_per_tensor = 12;
  double err = check_gradients(
      [&] {
        auto lc = content_loss(fx, stylized, content);
        auto ls = style_loss(fx, stylized, style);
        return add(scalar_mul(lc, w.content), scalar_mul(ls, w.style));
      },
      {stylized}, opts);
  CHECK(err < 1e-4);
}
