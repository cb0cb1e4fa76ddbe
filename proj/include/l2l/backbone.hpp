#pragma once

#include <cstddef>

#include "l2l/nn.hpp"

namespace l2l {

struct BackboneConfig {
  std::size_t image_size = 16;  // square input, divisible by 4
  std::size_t channels = 1;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t d = 64;
  bool pos_embedding = true;
};

// Fixed 2D sinusoidal table [H·W × d]: the first d/2 columns encode the row
// index, the last d/2 the column index, each as interleaved sin/cos pairs.
struct PosEmbedding2D {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t d = 0;
  Tensor table;

  static PosEmbedding2D build(std::size_t height, std::size_t width, std::size_t d);
};

// Backbone output for a batch. x_flat rows are ordered (sample, y, x).
struct FeatureMap {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t d = 0;
  Tensor x_spatial;    // [batch × H × W × d]
  Tensor x_flat;       // [batch·H·W × d], cross-attention values
  Tensor x_pos_added;  // [batch·H·W × d], cross-attention keys

  std::size_t cells() const { return height * width; }
};

// X̃ = X' + X_pos with the table repeated once per sample. With pos == nullptr
// (ablation) the input is returned unchanged.
Tensor add_positional(const Tensor& x_flat, const PosEmbedding2D* pos, std::size_t batch);

// Two stride-2 3×3 conv + GELU blocks, then a 1×1 projection to d.
class Backbone {
 public:
  static Backbone create(const BackboneConfig& config, Rng& rng);

  // images: [batch × H0 × W0 × C]. BadImageShape on size mismatch.
  FeatureMap extract(const Tensor& images) const;

  const BackboneConfig& config() const { return config_; }
  const PosEmbedding2D& positional() const { return pos_; }
  void collect(const std::string& prefix, ParamList& out) const;

  Linear conv1, conv2, projection;

 private:
  BackboneConfig config_;
  PosEmbedding2D pos_;
};

}  // namespace l2l
