#include "l2l/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace l2l {

std::string_view init_scheme_name(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::UniformFanIn: return "uniform_fanin";
    case InitScheme::Normal: return "normal";
    case InitScheme::Zeros: return "zeros";
    case InitScheme::Ones: return "ones";
  }
  return "zeros";
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "uniform_fanin") return InitScheme::UniformFanIn;
  if (name == "normal") return InitScheme::Normal;
  if (name == "zeros") return InitScheme::Zeros;
  if (name == "ones") return InitScheme::Ones;
  throw Error(ErrorCode::ConfigError, "unknown init scheme '" + std::string(name) + "'");
}

Tensor init_params(const Shape& shape, InitScheme scheme, Rng& rng, double sigma) {
  for (std::size_t d : shape) {
    if (d == 0) throw Error(ErrorCode::ShapeMismatch, "init_params with zero dimension");
  }
  std::vector<double> values(shape_numel(shape), 0.0);
  switch (scheme) {
    case InitScheme::UniformFanIn: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape.empty() ? 1 : shape[0]));
      for (double& v : values) v = rng.uniform(-bound, bound);
      break;
    }
    case InitScheme::Normal:
      for (double& v : values) v = sigma * rng.normal();
      break;
    case InitScheme::Zeros:
      break;
    case InitScheme::Ones:
      for (double& v : values) v = 1.0;
      break;
  }
  return Tensor::from(shape, std::move(values), true);
}

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

// ---- Linear -----------------------------------------------------------------

Linear Linear::create(std::size_t d_in, std::size_t d_out, Rng& rng) {
  return {init_params({d_in, d_out}, InitScheme::UniformFanIn, rng),
          init_params({d_out}, InitScheme::Zeros, rng)};
}

Tensor Linear::forward(const Tensor& x) const { return add_rowwise(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, InitScheme::UniformFanIn});
  out.push_back({prefix + ".bias", bias, InitScheme::Zeros});
}

LayerNorm LayerNorm::create(std::size_t d) {
  Rng unused(0);
  return {init_params({d}, InitScheme::Ones, unused), init_params({d}, InitScheme::Zeros, unused)};
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma, InitScheme::Ones});
  out.push_back({prefix + ".beta", beta, InitScheme::Zeros});
}

// ---- attention ----------------------------------------------------------------

MultiHeadAttention MultiHeadAttention::create(std::size_t d, std::size_t heads, Rng& rng) {
  if (heads == 0 || d % heads != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                "model width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  MultiHeadAttention mha;
  mha.heads = heads;
  mha.query = Linear::create(d, d, rng);
  mha.key = Linear::create(d, d, rng);
  mha.value = Linear::create(d, d, rng);
  mha.output = Linear::create(d, d, rng);
  return mha;
}

Tensor MultiHeadAttention::forward(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, std::size_t batch,
                                   std::vector<double>* probs) const {
  const Tensor q = query.forward(q_in);
  const Tensor k = key.forward(k_in);
  const Tensor v = value.forward(v_in);
  return output.forward(attention(q, k, v, heads, batch, probs));
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

// ---- decoder layer --------------------------------------------------------------

DecoderLayer DecoderLayer::create(const DecoderConfig& config, Rng& rng) {
  DecoderLayer layer;
  layer.self_attn = MultiHeadAttention::create(config.d, config.heads, rng);
  if (config.cross_attention) layer.cross_attn = MultiHeadAttention::create(config.d, config.heads, rng);
  layer.norm_self = LayerNorm::create(config.d);
  layer.norm_cross = LayerNorm::create(config.d);
  layer.norm_ffn = LayerNorm::create(config.d);
  layer.ffn_in = Linear::create(config.d, config.ffn_hidden, rng);
  layer.ffn_out = Linear::create(config.ffn_hidden, config.d, rng);
  return layer;
}

Tensor DecoderLayer::forward(const Tensor& tokens, const Tensor& mem_keys, const Tensor& mem_values,
                             std::size_t batch, LayerTrace* trace) const {
  Tensor x = norm_self.forward(
      add(tokens, self_attn.forward(tokens, tokens, tokens, batch, trace ? &trace->self_attention : nullptr)));
  if (cross_attn) {
    x = norm_cross.forward(
        add(x, cross_attn->forward(x, mem_keys, mem_values, batch, trace ? &trace->cross_attention : nullptr)));
  }
  return norm_ffn.forward(add(x, ffn_out.forward(gelu(ffn_in.forward(x)))));
}

void DecoderLayer::collect(const std::string& prefix, ParamList& out) const {
  self_attn.collect(prefix + ".self_attn", out);
  norm_self.collect(prefix + ".norm_self", out);
  if (cross_attn) {
    cross_attn->collect(prefix + ".cross_attn", out);
    norm_cross.collect(prefix + ".norm_cross", out);
  }
  ffn_in.collect(prefix + ".ffn_in", out);
  ffn_out.collect(prefix + ".ffn_out", out);
  norm_ffn.collect(prefix + ".norm_ffn", out);
}

// ---- optimization ---------------------------------------------------------------

Sgd::Sgd(std::vector<Tensor> params, SgdOptions options) : params_(std::move(params)), options_(options) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void Sgd::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!params_[k].has_grad()) {
      throw Error(ErrorCode::MissingGradient, "parameter #" + std::to_string(k) + " with shape " +
                                                  shape_to_string(params_[k].shape()) + " has no gradient");
    }
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto theta = params_[k].mutable_data();
    const auto g = params_[k].grad();
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = options_.momentum * v[i] + g[i] + options_.weight_decay * theta[i];
      theta[i] -= options_.learning_rate * v[i];
    }
  }
  zero_grad();
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double cosine_lr(double lr0, double t, double horizon) {
  if (horizon <= 0) return lr0;
  const double frac = std::clamp(t / horizon, 0.0, 1.0);
  return lr0 * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
}

PlateauScheduler::PlateauScheduler(double lr0, std::size_t patience, double factor)
    : lr_(lr0), patience_(patience), factor_(factor) {}

double PlateauScheduler::step(double metric) {
  if (!best_ || metric < *best_) {
    best_ = metric;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ > patience_) {
    lr_ /= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

}  // namespace l2l
