#pragma once

#include "s2wat/decoder.hpp"
#include "s2wat/encoder.hpp"
#include "s2wat/transfer.hpp"

namespace s2wat {

/// Smallest image extent accepted by stylization; anything smaller cannot
/// survive the three halvings plus decoder padding.
inline constexpr std::size_t kMinImageExtent = 16;

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t transfer_depth = 3;
  std::size_t transfer_heads = 8;
  DecoderConfig decoder;

  std::size_t transfer_dim() const { return 4 * encoder.embed_dim; }

  void validate() const {
    encoder.validate();
    if (transfer_heads == 0 || transfer_dim() % transfer_heads)
      throw ConfigError("transfer dim " + std::to_string(transfer_dim()) +
                        " not divisible by heads " + std::to_string(transfer_heads));
    decoder.validate();
    if (!decoder.channels.empty() && decoder.channels.front() != transfer_dim())
      throw ConfigError("decoder input channels must equal 4*embed_dim");
  }

  /// Laptop-scale preset used throughout the test suite.
  static ModelConfig desk() {
    ModelConfig cfg;
    cfg.encoder.embed_dim = 16;
    cfg.encoder.blocks = {2, 2, 2};
    cfg.encoder.strips = {2, 2, 2};
    cfg.encoder.heads = {2, 2, 2};
    cfg.transfer_depth = 2;
    cfg.transfer_heads = 2;
    cfg.decoder = DecoderConfig::mirrored_vgg(cfg.transfer_dim());
    return cfg;
  }

  /// Full-scale defaults (training at this size needs real datasets).
  static ModelConfig full_scale() {
    ModelConfig cfg;
    cfg.encoder.embed_dim = 96;
    cfg.encoder.blocks = {2, 2, 2};
    cfg.encoder.strips = {4, 4, 4};
    cfg.encoder.heads = {3, 6, 12};
    cfg.transfer_depth = 3;
    cfg.transfer_heads = 8;
    cfg.decoder = DecoderConfig::mirrored_vgg(cfg.transfer_dim());
    return cfg;
  }
};

template <class T>
struct ModelT {
  ModelConfig cfg;
  EncoderParamsT<T> encoder;
  std::vector<TransferLayerParamsT<T>> transfer;
  DecoderParamsT<T> decoder;
  ParameterStoreT<T> params;  // shares storage with the structs above
};

template <class T>
ModelT<T> make_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelT<T> m;
  m.cfg = cfg;
  m.encoder = make_encoder<T>(cfg.encoder, rng);
  for (std::size_t i = 0; i < cfg.transfer_depth; ++i)
    m.transfer.push_back(make_transfer_layer<T>(cfg.transfer_dim(), cfg.transfer_heads, rng));
  m.decoder = make_decoder<T>(cfg.decoder, rng);

  register_encoder(m.params, m.encoder, cfg.encoder);
  for (std::size_t i = 0; i < m.transfer.size(); ++i)
    register_transfer_layer(m.params, "transfer.layer" + std::to_string(i), m.transfer[i]);
  register_decoder(m.params, m.decoder);
  return m;
}

/// Optional probes filled during stylization.
template <class T>
struct StylizeProbesT {
  TensorT<T> first_cross_attention;   // [1, heads, N_c, N_s]
  StageFeaturesT<T> content_stages;
  StageFeaturesT<T> style_stages;
};

/// Full content+style -> stylized image pass. Output extents equal the
/// content extents exactly; odd inputs are reflect-padded to even before
/// encoding and the result is cropped back.
template <class T>
TensorT<T> stylize(const ModelT<T>& m, const TensorT<T>& content, const TensorT<T>& style,
                   StylizeProbesT<T>* probes = nullptr) {
  for (const TensorT<T>* img : {&content, &style}) {
    if (img->rank() != 3 || img->dim(0) != 3)
      throw ShapeError("stylize expects [3, H, W] images, got " + shape_str(img->shape()));
    if (img->dim(1) < kMinImageExtent || img->dim(2) < kMinImageExtent)
      throw DataError("image " + shape_str(img->shape()) + " smaller than minimum " +
                      std::to_string(kMinImageExtent) + "x" + std::to_string(kMinImageExtent));
  }
  std::size_t out_h = content.dim(1), out_w = content.dim(2);

  auto even = [](const TensorT<T>& img) {
    std::size_t h = img.dim(1), w = img.dim(2);
    if (h % 2 == 0 && w % 2 == 0) return img;
    return reflect_pad_2d(img, 0, h % 2, 0, w % 2);
  };
  auto c_in = even(content);
  auto s_in = even(style);

  auto c_stages = encoder_forward(c_in, m.cfg.encoder, m.encoder);
  auto s_stages = encoder_forward(s_in, m.cfg.encoder, m.encoder);
  std::size_t h8 = c_stages.stage3.dim(0), w8 = c_stages.stage3.dim(1);
  std::size_t dim = m.cfg.transfer_dim();

  auto f_c = reshape(c_stages.stage3, {h8 * w8, dim});
  auto f_s = reshape(s_stages.stage3,
                     {s_stages.stage3.dim(0) * s_stages.stage3.dim(1), dim});
  TensorT<T>* cross = probes ? &probes->first_cross_attention : nullptr;
  auto f_cs = transfer_forward(f_c, f_s, m.transfer, cross);

  auto img = cnn_decode(patch_reverse(f_cs, h8, w8), m.cfg.decoder, m.decoder);
  if (probes) {
    probes->content_stages = c_stages;
    probes->style_stages = s_stages;
  }
  if (img.dim(1) == out_h && img.dim(2) == out_w) return img;
  return crop_2d(img, 0, 0, out_h, out_w);
}

}  // namespace s2wat
