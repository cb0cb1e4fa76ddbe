#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "l2l/backbone.hpp"

namespace l2l {

struct AqnConfig {
  std::size_t num_attributes = 8;
  // Zero layers selects the FC-head baseline: mean-pooled X' through one
  // linear layer with M outputs.
  std::size_t layers = 1;
  DecoderConfig decoder;
};

struct AqnOutput {
  std::size_t batch = 0;
  Tensor responses;  // [batch·M × d]; undefined for the FC head
  Tensor probs;      // [batch·M], l_j
  std::vector<std::uint8_t> pseudo_sentence;  // [batch·M], s_j
};

struct DecoderTrace {
  std::vector<LayerTrace> layers;
};

// s_j = 1 iff l_j > 0.5 (strict). Plain values: no gradient crosses it.
std::vector<std::uint8_t> readout(std::span<const double> probs);

// ⟨W_j, r_j⟩ + b_j (pre-sigmoid) for every row of a [batch·M × d] response matrix, with
// independent weight rows W_j and biases b_j per attribute.
Tensor per_attribute_logits(const Tensor& responses, const Tensor& weight, const Tensor& bias, std::size_t batch);

class Aqn {
 public:
  static Aqn create(const AqnConfig& config, Rng& rng);

  AqnOutput forward(const FeatureMap& features, DecoderTrace* trace = nullptr) const;

  const AqnConfig& config() const { return config_; }
  bool is_fc_head() const { return config_.layers == 0; }
  void collect(const std::string& prefix, ParamList& out) const;

  Tensor queries;  // [M × d]
  std::vector<DecoderLayer> layers;
  Tensor classifier_weight;  // [M × d]
  Tensor classifier_bias;    // [M]
  Linear fc_head;            // [d × M], only for layers == 0

 private:
  AqnConfig config_;
};

}  // namespace l2l
