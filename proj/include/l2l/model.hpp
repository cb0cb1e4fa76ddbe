#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "l2l/icmlm.hpp"

namespace l2l {

enum class Mode { FcHead, AqnOnly, Label2Label, MlmNoImage, TwoStage };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

struct ModelConfig {
  Mode mode = Mode::Label2Label;
  std::size_t num_attributes = 8;
  std::size_t image_size = 16;
  std::size_t channels = 1;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 128;
  std::size_t aqn_layers = 1;  // forced to 0 in fc_head mode
  std::size_t mlm_layers = 2;
  bool pos_embedding = true;
  MaskStrategy mask_strategy = MaskStrategy::AttributeSpecific;
  std::uint64_t init_seed = 7;

  bool has_icmlm() const { return mode == Mode::Label2Label || mode == Mode::MlmNoImage || mode == Mode::TwoStage; }
  // ConfigError on inconsistent dimensions.
  void validate() const;
};

struct ForwardPass {
  FeatureMap features;
  AqnOutput aqn;
  std::optional<IcmlmOutput> mlm;
  std::vector<MaskedSentence> sentences;
  DecoderTrace aqn_trace;
  DecoderTrace mlm_trace;

  // p when an IC-MLM head exists, l otherwise.
  const Tensor& final_probs() const { return mlm ? mlm->probs : aqn.probs; }
};

struct ForwardOptions {
  // Masking applies only when mask_rng is set (training). Inference feeds the
  // unmasked pseudo sentence.
  double alpha = 0.0;
  Rng* mask_rng = nullptr;
  // Overrides the sentences built from the readout, e.g. to keep the graph
  // fixed across finite-difference probes.
  const std::vector<MaskedSentence>* sentences = nullptr;
  bool trace = false;
  // Runs backbone and AQN without recording (two-stage second phase).
  bool freeze_front = false;
};

class Label2LabelModel {
 public:
  static Label2LabelModel create(const ModelConfig& config);

  // images: [batch × S × S × C]
  ForwardPass forward(const Tensor& images, const ForwardOptions& options = {}) const;
  // Final-head probabilities without recording a graph, flat [batch·M].
  std::vector<double> predict(const Tensor& images) const;

  const ModelConfig& config() const { return config_; }
  ParamList params() const;
  ParamList front_params() const;  // backbone + AQN
  ParamList icmlm_params() const;

  const Backbone& backbone() const { return backbone_; }
  const Aqn& aqn() const { return aqn_; }
  const std::optional<Icmlm>& icmlm() const { return icmlm_; }

  // Directory of <name>.l2lt tensors plus manifest.txt (name, file, shape,
  // scheme) and model.cfg (key=value).
  void save(const std::filesystem::path& dir) const;
  static Label2LabelModel load(const std::filesystem::path& dir);

 private:
  ModelConfig config_;
  Backbone backbone_;
  Aqn aqn_;
  std::optional<Icmlm> icmlm_;
};

// Packs row-major sample images into one [batch × S × S × C] tensor.
Tensor stack_images(const std::vector<const std::vector<double>*>& images, std::size_t size, std::size_t channels);

}  // namespace l2l
