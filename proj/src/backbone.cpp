#include "l2l/backbone.hpp"

#include <cmath>

namespace l2l {

PosEmbedding2D PosEmbedding2D::build(std::size_t height, std::size_t width, std::size_t d) {
  if (d % 4 != 0) throw Error(ErrorCode::ShapeMismatch, "positional width must be divisible by 4");
  const std::size_t half = d / 2;
  std::vector<double> table(height * width * d);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double* row = table.data() + (y * width + x) * d;
      for (std::size_t i = 0; i < half / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(half));
        row[2 * i] = std::sin(static_cast<double>(y) * freq);
        row[2 * i + 1] = std::cos(static_cast<double>(y) * freq);
        row[half + 2 * i] = std::sin(static_cast<double>(x) * freq);
        row[half + 2 * i + 1] = std::cos(static_cast<double>(x) * freq);
      }
    }
  }
  return {height, width, d, Tensor::from({height * width, d}, std::move(table))};
}

Tensor add_positional(const Tensor& x_flat, const PosEmbedding2D* pos, std::size_t batch) {
  if (!pos) return x_flat;
  const std::size_t cells = pos->height * pos->width;
  if (x_flat.rank() != 2 || x_flat.dim(0) != batch * cells || x_flat.dim(1) != pos->d) {
    throw Error(ErrorCode::ShapeMismatch, "add_positional: features " + shape_to_string(x_flat.shape()) +
                                              " vs table " + shape_to_string(pos->table.shape()));
  }
  std::vector<std::size_t> ids(batch * cells);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i % cells;
  return add(x_flat, gather_rows(pos->table, ids));
}

Backbone Backbone::create(const BackboneConfig& config, Rng& rng) {
  if (config.image_size == 0 || config.image_size % 4 != 0) {
    throw Error(ErrorCode::BadImageShape, "image size " + std::to_string(config.image_size) +
                                              " is not a positive multiple of 4");
  }
  Backbone b;
  b.config_ = config;
  b.conv1 = Linear::create(9 * config.channels, config.conv1_channels, rng);
  b.conv2 = Linear::create(9 * config.conv1_channels, config.conv2_channels, rng);
  b.projection = Linear::create(config.conv2_channels, config.d, rng);
  b.pos_ = PosEmbedding2D::build(config.image_size / 4, config.image_size / 4, config.d);
  return b;
}

FeatureMap Backbone::extract(const Tensor& images) const {
  const std::size_t s = config_.image_size;
  if (images.rank() != 4 || images.dim(1) != s || images.dim(2) != s || images.dim(3) != config_.channels) {
    throw Error(ErrorCode::BadImageShape, "expected [batch x " + std::to_string(s) + " x " + std::to_string(s) +
                                              " x " + std::to_string(config_.channels) + "], got " +
                                              shape_to_string(images.shape()));
  }
  const std::size_t batch = images.dim(0);
  const Tensor pixels = reshape(images, {batch * s * s, config_.channels});

  Conv2dGeometry g1{batch, s, s, config_.channels, 3, 2, 1};
  const Tensor h1 = gelu(conv1.forward(im2col(pixels, g1)));
  Conv2dGeometry g2{batch, g1.out_height(), g1.out_width(), config_.conv1_channels, 3, 2, 1};
  const Tensor h2 = gelu(conv2.forward(im2col(h1, g2)));

  FeatureMap fm;
  fm.batch = batch;
  fm.height = g2.out_height();
  fm.width = g2.out_width();
  fm.d = config_.d;
  fm.x_flat = projection.forward(h2);
  fm.x_spatial = reshape(fm.x_flat, {batch, fm.height, fm.width, fm.d});
  fm.x_pos_added = add_positional(fm.x_flat, config_.pos_embedding ? &pos_ : nullptr, batch);
  return fm;
}

void Backbone::collect(const std::string& prefix, ParamList& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
  projection.collect(prefix + ".projection", out);
}

}  // namespace l2l
