#pragma once

#include <functional>

#include "s2wat/features.hpp"

namespace s2wat {

/// Weights of the four loss terms.
struct LossWeights {
  double content = 2.0;
  double style = 3.0;
  double id1 = 50.0;
  double id2 = 1.0;
};

/// Guards divisions and sqrt against constant channels.
inline constexpr double kStatEps = 1e-5;

inline const std::vector<std::string> kContentTaps = {"relu4_1", "relu5_1"};
inline const std::vector<std::string> kStyleTapsTrain = {"relu2_1", "relu3_1", "relu4_1",
                                                         "relu5_1"};
inline const std::vector<std::string> kStyleTapsMetric = {"relu1_1", "relu2_1", "relu3_1",
                                                          "relu4_1", "relu5_1"};
inline const std::vector<std::string> kIdentityTaps = {"relu2_1", "relu3_1", "relu4_1", "relu5_1"};

/// Mean squared error over all elements. All norms in the losses use this
/// reduction; acceptance thresholds are defined under it.
template <class T>
TensorT<T> mse(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mse operands differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  auto d = sub(a, b);
  return mean_all(mul(d, d));
}

/// Per-channel spatial mean of a [C, H, W] map, as [C, 1].
template <class T>
TensorT<T> channel_mean(const TensorT<T>& chw) {
  std::size_t c = chw.dim(0), hw = chw.dim(1) * chw.dim(2);
  return mean_lastdim(reshape(chw, {c, hw}));
}

/// Per-channel spatial std sqrt(var + eps), as [C, 1].
template <class T>
TensorT<T> channel_std(const TensorT<T>& chw) {
  std::size_t c = chw.dim(0), hw = chw.dim(1) * chw.dim(2);
  auto f = reshape(chw, {c, hw});
  auto mu = mean_lastdim(f);
  auto d = sub(f, mu);
  auto var = mean_lastdim(mul(d, d));
  return sqrt_elem(add(var, TensorT<T>::scalar(static_cast<T>(kStatEps))));
}

/// Mean-variance channel-wise normalization: (f - mu) / sqrt(var + eps),
/// returned as [C, H*W].
template <class T>
TensorT<T> channel_normalize(const TensorT<T>& chw) {
  std::size_t c = chw.dim(0), hw = chw.dim(1) * chw.dim(2);
  auto f = reshape(chw, {c, hw});
  auto mu = mean_lastdim(f);
  auto d = sub(f, mu);
  auto var = mean_lastdim(mul(d, d));
  auto sd = sqrt_elem(add(var, TensorT<T>::scalar(static_cast<T>(kStatEps))));
  return div(d, sd);
}

/// Distance between normalized deep features of the stylized result and the
/// content image, summed over the relu4_1/relu5_1 taps.
template <class T>
TensorT<T> content_loss(const FeatureExtractorT<T>& fx, const TensorT<T>& stylized,
                        const TensorT<T>& content) {
  if (stylized.shape() != content.shape())
    throw ShapeError("content_loss extent mismatch: " + shape_str(stylized.shape()) + " vs " +
                     shape_str(content.shape()));
  auto fs = fx.extract(stylized, kContentTaps);
  auto fc = fx.extract(content, kContentTaps);
  TensorT<T> total = TensorT<T>::scalar(T(0));
  for (const auto& tap : kContentTaps)
    total = add(total, mse(channel_normalize(fs.at(tap)), channel_normalize(fc.at(tap))));
  return total;
}

/// Distance between per-channel feature statistics (mean and std) of the
/// stylized result and the style image. Training mode uses relu2_1..relu5_1;
/// metric mode additionally includes relu1_1.
template <class T>
TensorT<T> style_loss(const FeatureExtractorT<T>& fx, const TensorT<T>& stylized,
                      const TensorT<T>& style, bool metric_mode = false) {
  const auto& taps = metric_mode ? kStyleTapsMetric : kStyleTapsTrain;
  auto fs = fx.extract(stylized, taps);
  auto ft = fx.extract(style, taps);
  TensorT<T> total = TensorT<T>::scalar(T(0));
  for (const auto& tap : taps) {
    total = add(total, mse(channel_mean(fs.at(tap)), channel_mean(ft.at(tap))));
    total = add(total, mse(channel_std(fs.at(tap)), channel_std(ft.at(tap))));
  }
  return total;
}

template <class T>
using StylizeFn = std::function<TensorT<T>(const TensorT<T>&, const TensorT<T>&)>;

/// Identity losses: the model should reproduce an image stylized by itself.
/// Returns (pixel-space loss, feature-space loss over the identity taps).
template <class T>
std::pair<TensorT<T>, TensorT<T>> identity_losses(const StylizeFn<T>& model,
                                                  const FeatureExtractorT<T>& fx,
                                                  const TensorT<T>& content,
                                                  const TensorT<T>& style) {
  auto icc = model(content, content);
  auto iss = model(style, style);
  auto id1 = add(mse(icc, content), mse(iss, style));
  auto fcc = fx.extract(icc, kIdentityTaps);
  auto fc = fx.extract(content, kIdentityTaps);
  auto fss = fx.extract(iss, kIdentityTaps);
  auto fs = fx.extract(style, kIdentityTaps);
  TensorT<T> id2 = TensorT<T>::scalar(T(0));
  for (const auto& tap : kIdentityTaps) {
    id2 = add(id2, mse(fcc.at(tap), fc.at(tap)));
    id2 = add(id2, mse(fss.at(tap), fs.at(tap)));
  }
  return {id1, id2};
}

/// Weighted sum of the four parts.
template <class T>
TensorT<T> total_loss(const TensorT<T>& content, const TensorT<T>& style, const TensorT<T>& id1,
                      const TensorT<T>& id2, const LossWeights& w) {
  auto total = scalar_mul(content, static_cast<T>(w.content));
  total = add(total, scalar_mul(style, static_cast<T>(w.style)));
  total = add(total, scalar_mul(id1, static_cast<T>(w.id1)));
  total = add(total, scalar_mul(id2, static_cast<T>(w.id2)));
  return total;
}

}  // namespace s2wat
