#include "l2l/icmlm.hpp"

namespace l2l {

std::string_view mask_strategy_name(MaskStrategy strategy) {
  switch (strategy) {
    case MaskStrategy::AttributeSpecific: return "attribute_specific";
    case MaskStrategy::AttributeAgnostic: return "attribute_agnostic";
    case MaskStrategy::ZeroVector: return "zero_vector";
  }
  return "attribute_specific";
}

MaskStrategy parse_mask_strategy(std::string_view name) {
  if (name == "attribute_specific") return MaskStrategy::AttributeSpecific;
  if (name == "attribute_agnostic") return MaskStrategy::AttributeAgnostic;
  if (name == "zero_vector") return MaskStrategy::ZeroVector;
  throw Error(ErrorCode::ConfigError, "unknown mask strategy '" + std::string(name) + "'");
}

MaskedSentence mask_sentence(std::span<const std::uint8_t> sentence, double alpha, Rng& rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::DomainError, "mask ratio outside [0, 1]");
  MaskedSentence ms;
  ms.words.reserve(sentence.size());
  for (std::size_t j = 0; j < sentence.size(); ++j) {
    if (rng.bernoulli(alpha)) {
      ms.words.push_back(Word::Mask);
      ms.mask_positions.push_back(j);
    } else {
      ms.words.push_back(sentence[j] ? Word::One : Word::Zero);
    }
  }
  return ms;
}

MaskedSentence unmasked_sentence(std::span<const std::uint8_t> sentence) {
  MaskedSentence ms;
  ms.words.reserve(sentence.size());
  for (std::uint8_t v : sentence) ms.words.push_back(v ? Word::One : Word::Zero);
  return ms;
}

std::size_t WordVocab::mask_rows(std::size_t num_attributes, MaskStrategy strategy) {
  switch (strategy) {
    case MaskStrategy::AttributeSpecific: return num_attributes;
    case MaskStrategy::AttributeAgnostic: return 1;
    case MaskStrategy::ZeroVector: return 0;
  }
  return 0;
}

WordVocab WordVocab::create(std::size_t num_attributes, std::size_t d, MaskStrategy strategy, Rng& rng) {
  const std::size_t rows = 2 * num_attributes + mask_rows(num_attributes, strategy);
  return {num_attributes, strategy, init_params({rows, d}, InitScheme::Normal, rng)};
}

Tensor embed_words(std::span<const MaskedSentence> sentences, const WordVocab& vocab, MaskStrategy strategy) {
  if (strategy != vocab.strategy) {
    throw Error(ErrorCode::StrategyMismatch, "vocabulary built for " + std::string(mask_strategy_name(vocab.strategy)) +
                                                 ", asked for " + std::string(mask_strategy_name(strategy)));
  }
  const std::size_t m = vocab.num_attributes;
  std::vector<std::size_t> ids;
  std::vector<double> keep;
  ids.reserve(sentences.size() * m);
  bool any_zero_mask = false;
  for (const auto& s : sentences) {
    if (s.words.size() != m) {
      throw Error(ErrorCode::ShapeMismatch, "sentence of length " + std::to_string(s.words.size()) + " for " +
                                                std::to_string(m) + " attributes");
    }
    for (std::size_t j = 0; j < m; ++j) {
      const Word w = s.words[j];
      if (w != Word::Mask) {
        ids.push_back(2 * j + static_cast<std::size_t>(w));
        keep.push_back(1.0);
        continue;
      }
      switch (strategy) {
        case MaskStrategy::AttributeSpecific: ids.push_back(2 * m + j); break;
        case MaskStrategy::AttributeAgnostic: ids.push_back(2 * m); break;
        case MaskStrategy::ZeroVector:
          ids.push_back(2 * j);  // placeholder row, zeroed below
          any_zero_mask = true;
          break;
      }
      keep.push_back(0.0);
    }
  }
  Tensor embeds = gather_rows(vocab.table, ids);
  if (any_zero_mask) {
    const std::size_t d = vocab.table.dim(1);
    std::vector<double> mask(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t k = 0; k < d; ++k) mask[i * d + k] = keep[i];
    embeds = mul(embeds, Tensor::from({ids.size(), d}, std::move(mask)));
  }
  return embeds;
}

Icmlm Icmlm::create(const IcmlmConfig& config, Rng& rng) {
  if (config.layers == 0) throw Error(ErrorCode::ConfigError, "IC-MLM needs at least one decoder layer");
  Icmlm net;
  net.config_ = config;
  const std::size_t m = config.num_attributes, d = config.decoder.d;
  net.vocab = WordVocab::create(m, d, config.mask_strategy, rng);
  DecoderConfig dc = config.decoder;
  dc.cross_attention = config.image_conditioned;
  for (std::size_t i = 0; i < config.layers; ++i) net.layers.push_back(DecoderLayer::create(dc, rng));
  net.classifier_weight = init_params({m, d}, InitScheme::UniformFanIn, rng);
  net.classifier_bias = init_params({m}, InitScheme::Zeros, rng);
  return net;
}

IcmlmOutput Icmlm::run(const Tensor& embeds, const Tensor* keys, const Tensor* values, std::size_t batch,
                       DecoderTrace* trace) const {
  const std::size_t m = config_.num_attributes;
  if (embeds.rank() != 2 || embeds.dim(0) != batch * m || embeds.dim(1) != config_.decoder.d) {
    throw Error(ErrorCode::ShapeMismatch, "IC-MLM embeddings " + shape_to_string(embeds.shape()));
  }
  Tensor e = embeds;
  if (trace) trace->layers.assign(layers.size(), {});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerTrace* lt = trace ? &trace->layers[i] : nullptr;
    e = keys ? layers[i].forward(e, *keys, *values, batch, lt) : layers[i].forward(e, e, e, batch, lt);
  }
  IcmlmOutput out;
  out.batch = batch;
  out.token_responses = e;
  out.probs = sigmoid(per_attribute_logits(e, classifier_weight, classifier_bias, batch));
  return out;
}

IcmlmOutput Icmlm::forward(const Tensor& embeds, const FeatureMap& features, DecoderTrace* trace) const {
  if (!config_.image_conditioned) return forward_no_image(embeds, features.batch, trace);
  if (features.d != config_.decoder.d) throw Error(ErrorCode::ShapeMismatch, "IC-MLM feature width mismatch");
  return run(embeds, &features.x_pos_added, &features.x_flat, features.batch, trace);
}

IcmlmOutput Icmlm::forward_no_image(const Tensor& embeds, std::size_t batch, DecoderTrace* trace) const {
  if (config_.image_conditioned) {
    throw Error(ErrorCode::ConfigError, "forward_no_image on an image-conditioned model");
  }
  return run(embeds, nullptr, nullptr, batch, trace);
}

IcmlmOutput Icmlm::infer(const AqnOutput& aqn_out, const FeatureMap& features, DecoderTrace* trace) const {
  const std::size_t m = config_.num_attributes;
  std::vector<MaskedSentence> sentences;
  sentences.reserve(aqn_out.batch);
  for (std::size_t b = 0; b < aqn_out.batch; ++b) {
    sentences.push_back(unmasked_sentence(std::span(aqn_out.pseudo_sentence).subspan(b * m, m)));
  }
  return forward(embed_words(sentences, vocab, config_.mask_strategy), features, trace);
}

void Icmlm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".vocab", vocab.table, InitScheme::Normal});
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".layer" + std::to_string(i), out);
  out.push_back({prefix + ".classifier.weight", classifier_weight, InitScheme::UniformFanIn});
  out.push_back({prefix + ".classifier.bias", classifier_bias, InitScheme::Zeros});
}

}  // namespace l2l
