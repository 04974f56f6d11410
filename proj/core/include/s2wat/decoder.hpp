#pragma once

#include <vector>

#include "s2wat/attention.hpp"

namespace s2wat {

template <class T>
struct ConvT {
  TensorT<T> w;  // [Cout, Cin, 3, 3]
  TensorT<T> b;  // [Cout]
};

template <class T>
ConvT<T> make_conv(std::size_t cin, std::size_t cout, Rng& rng) {
  std::size_t fan_in = cin * 9;
  return {kaiming_uniform<T>({cout, cin, 3, 3}, fan_in, rng),
          kaiming_uniform<T>({cout}, fan_in, rng)};
}

/// Mirrored-VGG decoding schedule: channel counts of the conv chain plus the
/// upsample positions. Exactly three x2 upsamplings take H/8 back to H.
struct DecoderConfig {
  std::vector<std::size_t> channels;    // e.g. {4C, 2C, C, C/2, 3}
  std::vector<bool> upsample_after;     // one entry per conv

  static DecoderConfig mirrored_vgg(std::size_t four_c) {
    DecoderConfig cfg;
    cfg.channels = {four_c, four_c / 2, four_c / 4, four_c / 8, 3};
    cfg.upsample_after = {true, true, true, false};
    return cfg;
  }

  std::size_t conv_count() const { return channels.empty() ? 0 : channels.size() - 1; }

  void validate() const {
    if (channels.size() < 2) throw ConfigError("decoder needs at least one conv");
    if (channels.back() != 3) throw ConfigError("decoder must end in 3 channels");
    for (std::size_t c : channels)
      if (c == 0) throw ConfigError("decoder channel counts must be positive");
    if (upsample_after.size() != conv_count())
      throw ConfigError("decoder upsample schedule length mismatch");
    std::size_t ups = 0;
    for (bool u : upsample_after) ups += u ? 1 : 0;
    if (ups != 3) throw ConfigError("decoder must upsample exactly three times");
  }
};

template <class T>
struct DecoderParamsT {
  std::vector<ConvT<T>> convs;
};

template <class T>
DecoderParamsT<T> make_decoder(const DecoderConfig& cfg, Rng& rng) {
  cfg.validate();
  DecoderParamsT<T> p;
  for (std::size_t i = 0; i + 1 < cfg.channels.size(); ++i)
    p.convs.push_back(make_conv<T>(cfg.channels[i], cfg.channels[i + 1], rng));
  return p;
}

template <class T>
void register_decoder(ParameterStoreT<T>& store, DecoderParamsT<T>& p) {
  for (std::size_t i = 0; i < p.convs.size(); ++i) {
    store.add("decoder.block" + std::to_string(i) + ".w", p.convs[i].w);
    store.add("decoder.block" + std::to_string(i) + ".b", p.convs[i].b);
  }
}

/// [D, H/8, W/8] feature map -> [3, H, W] image. Each conv is reflect-padded
/// 3x3 followed by ReLU except the last, which stays linear; the output is
/// free-range (clamping happens at image-write time only).
template <class T>
TensorT<T> cnn_decode(const TensorT<T>& x, const DecoderConfig& cfg, const DecoderParamsT<T>& p) {
  cfg.validate();
  if (x.rank() != 3 || x.dim(0) != cfg.channels[0])
    throw ShapeError("cnn_decode input " + shape_str(x.shape()) + " does not match schedule");
  TensorT<T> t = x;
  for (std::size_t i = 0; i < p.convs.size(); ++i) {
    t = reflect_pad_2d(t, 1, 1, 1, 1);
    t = conv2d(t, p.convs[i].w, p.convs[i].b);
    if (i + 1 < p.convs.size()) t = relu(t);
    if (cfg.upsample_after[i]) t = upsample_nearest2(t);
  }
  return t;
}

}  // namespace s2wat
