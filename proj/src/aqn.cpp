#include "l2l/aqn.hpp"

namespace l2l {

std::vector<std::uint8_t> readout(std::span<const double> probs) {
  std::vector<std::uint8_t> s(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) s[i] = probs[i] > 0.5 ? 1 : 0;
  return s;
}

Tensor per_attribute_logits(const Tensor& responses, const Tensor& weight, const Tensor& bias, std::size_t batch) {
  const std::size_t m = weight.dim(0);
  if (responses.rank() != 2 || responses.dim(0) != batch * m || responses.dim(1) != weight.dim(1) ||
      bias.numel() != m) {
    throw Error(ErrorCode::ShapeMismatch, "classifier: responses " + shape_to_string(responses.shape()) +
                                              " vs weight " + shape_to_string(weight.shape()));
  }
  std::vector<std::size_t> ids(batch * m);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i % m;
  const Tensor dots = sum(mul(responses, gather_rows(weight, ids)), 1);
  const Tensor b = reshape(gather_rows(reshape(bias, {m, 1}), ids), {batch * m});
  return add(dots, b);
}

Aqn Aqn::create(const AqnConfig& config, Rng& rng) {
  if (config.num_attributes == 0) throw Error(ErrorCode::ShapeMismatch, "AQN needs at least one attribute");
  Aqn aqn;
  aqn.config_ = config;
  const std::size_t m = config.num_attributes, d = config.decoder.d;
  if (config.layers == 0) {
    aqn.fc_head = Linear::create(d, m, rng);
    return aqn;
  }
  aqn.queries = init_params({m, d}, InitScheme::Normal, rng);
  DecoderConfig dc = config.decoder;
  dc.cross_attention = true;
  for (std::size_t i = 0; i < config.layers; ++i) aqn.layers.push_back(DecoderLayer::create(dc, rng));
  aqn.classifier_weight = init_params({m, d}, InitScheme::UniformFanIn, rng);
  aqn.classifier_bias = init_params({m}, InitScheme::Zeros, rng);
  return aqn;
}

AqnOutput Aqn::forward(const FeatureMap& features, DecoderTrace* trace) const {
  const std::size_t m = config_.num_attributes;
  const std::size_t batch = features.batch;
  if (features.d != config_.decoder.d) {
    throw Error(ErrorCode::ShapeMismatch, "feature width " + std::to_string(features.d) + " vs model width " +
                                              std::to_string(config_.decoder.d));
  }
  AqnOutput out;
  out.batch = batch;
  Tensor logits;
  if (is_fc_head()) {
    const Tensor pooled = mean(reshape(features.x_flat, {batch, features.cells(), features.d}), 1);
    logits = reshape(fc_head.forward(pooled), {batch * m});
  } else {
    std::vector<std::size_t> ids(batch * m);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i % m;
    Tensor q = gather_rows(queries, ids);
    if (trace) trace->layers.assign(layers.size(), {});
    for (std::size_t i = 0; i < layers.size(); ++i) {
      q = layers[i].forward(q, features.x_pos_added, features.x_flat, batch, trace ? &trace->layers[i] : nullptr);
    }
    out.responses = q;
    logits = per_attribute_logits(q, classifier_weight, classifier_bias, batch);
  }
  out.probs = sigmoid(logits);
  out.pseudo_sentence = readout(out.probs.data());
  return out;
}

void Aqn::collect(const std::string& prefix, ParamList& out) const {
  if (is_fc_head()) {
    fc_head.collect(prefix + ".fc_head", out);
    return;
  }
  out.push_back({prefix + ".queries", queries, InitScheme::Normal});
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".layer" + std::to_string(i), out);
  out.push_back({prefix + ".classifier.weight", classifier_weight, InitScheme::UniformFanIn});
  out.push_back({prefix + ".classifier.bias", classifier_bias, InitScheme::Zeros});
}

}  // namespace l2l
