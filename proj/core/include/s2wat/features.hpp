#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "s2wat/decoder.hpp"
#include "s2wat/ops.hpp"

namespace s2wat {

inline const std::array<std::string, 5> kTapNames = {"relu1_1", "relu2_1", "relu3_1", "relu4_1",
                                                     "relu5_1"};

/// Fixed (non-trained) VGG-shaped feature network: blocks of reflect-padded
/// 3x3 convs with ReLU, 2x2 max pooling between blocks. Tap relu{k}_1 is the
/// activation after the first conv of block k, so tap extents halve at each
/// tap boundary. Weights are frozen; gradients flow through to the input.
template <class T>
class FeatureExtractorT {
 public:
  static FeatureExtractorT surrogate(std::uint64_t seed) {
    // Reduced-width random network; acceptance never depends on third-party
    // pretrained weights.
    static constexpr std::size_t kChannels[5] = {8, 16, 32, 64, 64};
    Rng rng(seed);
    FeatureExtractorT fx;
    std::size_t cin = 3;
    for (std::size_t k = 0; k < 5; ++k) {
      std::vector<ConvT<T>> block;
      ConvT<T> conv{he_normal<T>({kChannels[k], cin, 3, 3}, cin * 9, rng),
                    TensorT<T>::zeros({kChannels[k]})};
      block.push_back(std::move(conv));
      cin = kChannels[k];
      fx.blocks_.push_back(std::move(block));
    }
    return fx;
  }

  static FeatureExtractorT from_blocks(std::vector<std::vector<ConvT<T>>> blocks) {
    if (blocks.size() < 5) throw DataError("feature extractor needs at least 5 conv blocks");
    FeatureExtractorT fx;
    fx.blocks_ = std::move(blocks);
    return fx;
  }

  const std::vector<std::vector<ConvT<T>>>& blocks() const { return blocks_; }

  /// Returns the requested taps for a [3, H, W] image, H, W >= 32.
  std::map<std::string, TensorT<T>> extract(const TensorT<T>& img,
                                            const std::vector<std::string>& taps) const {
    if (img.rank() != 3 || img.dim(0) != 3)
      throw ShapeError("extract expects a [3, H, W] image, got " + shape_str(img.shape()));
    if (img.dim(1) < 32 || img.dim(2) < 32)
      throw DataError("extract needs extents >= 32, got " + shape_str(img.shape()));
    std::size_t last_block = 0;
    for (const auto& t : taps) last_block = std::max(last_block, tap_block(t));

    std::map<std::string, TensorT<T>> out;
    TensorT<T> x = img;
    for (std::size_t k = 0; k <= last_block; ++k) {
      if (k > 0) x = maxpool2x2(x);
      for (std::size_t j = 0; j < blocks_[k].size(); ++j) {
        x = relu(conv2d(reflect_pad_2d(x, 1, 1, 1, 1), blocks_[k][j].w, blocks_[k][j].b));
        if (j == 0) {
          const std::string& name = kTapNames[k];
          for (const auto& t : taps)
            if (t == name) out.emplace(name, x);
        }
      }
    }
    return out;
  }

 private:
  static std::size_t tap_block(const std::string& tap) {
    for (std::size_t k = 0; k < kTapNames.size(); ++k)
      if (kTapNames[k] == tap) return k;
    throw ConfigError("unknown feature tap: " + tap);
  }

  std::vector<std::vector<ConvT<T>>> blocks_;
};

using FeatureExtractor = FeatureExtractorT<float>;

}  // namespace s2wat
