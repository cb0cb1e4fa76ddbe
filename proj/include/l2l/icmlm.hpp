#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "l2l/aqn.hpp"

namespace l2l {

enum class MaskStrategy { AttributeSpecific, AttributeAgnostic, ZeroVector };

std::string_view mask_strategy_name(MaskStrategy strategy);
MaskStrategy parse_mask_strategy(std::string_view name);

enum class Word : std::uint8_t { Zero = 0, One = 1, Mask = 2 };

struct MaskedSentence {
  std::vector<Word> words;
  std::vector<std::size_t> mask_positions;
};

// Each position independently becomes Mask with probability alpha. Draws are
// consumed in position order 0..M−1, one per position.
MaskedSentence mask_sentence(std::span<const std::uint8_t> sentence, double alpha, Rng& rng);
// No masking: the inference path.
MaskedSentence unmasked_sentence(std::span<const std::uint8_t> sentence);

// Token table of 2M + m_mask rows. Rows 2j and 2j+1 hold attribute j's value
// 0 and 1; mask rows follow (M attribute-specific rows, one shared row, or
// none for the zero-vector strategy).
struct WordVocab {
  std::size_t num_attributes = 0;
  MaskStrategy strategy = MaskStrategy::AttributeSpecific;
  Tensor table;

  static WordVocab create(std::size_t num_attributes, std::size_t d, MaskStrategy strategy, Rng& rng);
  static std::size_t mask_rows(std::size_t num_attributes, MaskStrategy strategy);
  std::size_t size() const { return table.dim(0); }
};

// Looks up one embedding per word, without any positional term.
// StrategyMismatch if `strategy` differs from the vocabulary's layout.
Tensor embed_words(std::span<const MaskedSentence> sentences, const WordVocab& vocab, MaskStrategy strategy);

struct IcmlmConfig {
  std::size_t num_attributes = 8;
  std::size_t layers = 2;
  DecoderConfig decoder;
  MaskStrategy mask_strategy = MaskStrategy::AttributeSpecific;
  // false builds the plain-MLM baseline: decoder layers without cross-attention.
  bool image_conditioned = true;
};

struct IcmlmOutput {
  std::size_t batch = 0;
  Tensor token_responses;  // [batch·M × d]
  Tensor probs;            // [batch·M], p_j for every position
};

class Icmlm {
 public:
  static Icmlm create(const IcmlmConfig& config, Rng& rng);

  // Runs the decoder stack over word embeddings; keys X̃ and values X' come
  // from `features`, which the plain-MLM variant ignores.
  IcmlmOutput forward(const Tensor& embeds, const FeatureMap& features, DecoderTrace* trace = nullptr) const;
  // Plain-MLM path: self-attention and FFN only. Valid for either variant's
  // weights only when built with image_conditioned = false.
  IcmlmOutput forward_no_image(const Tensor& embeds, std::size_t batch, DecoderTrace* trace = nullptr) const;

  // Deterministic inference: embeds the unmasked pseudo sentence.
  IcmlmOutput infer(const AqnOutput& aqn_out, const FeatureMap& features, DecoderTrace* trace = nullptr) const;

  const IcmlmConfig& config() const { return config_; }
  void collect(const std::string& prefix, ParamList& out) const;

  WordVocab vocab;
  std::vector<DecoderLayer> layers;
  Tensor classifier_weight;  // [M × d]
  Tensor classifier_bias;    // [M]

 private:
  IcmlmOutput run(const Tensor& embeds, const Tensor* keys, const Tensor* values, std::size_t batch,
                  DecoderTrace* trace) const;

  IcmlmConfig config_;
};

}  // namespace l2l
