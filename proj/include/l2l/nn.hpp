#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "l2l/rng.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

enum class InitScheme { UniformFanIn, Normal, Zeros, Ones };

std::string_view init_scheme_name(InitScheme scheme);
InitScheme parse_init_scheme(std::string_view name);

// uniform_fanin draws from U(−1/√fan_in, 1/√fan_in) with fan_in = shape[0];
// normal draws N(0, sigma²). The result requires grad.
Tensor init_params(const Shape& shape, InitScheme scheme, Rng& rng, double sigma = 0.02);

struct Parameter {
  std::string name;
  Tensor tensor;
  InitScheme scheme;
};

using ParamList = std::vector<Parameter>;

std::vector<Tensor> tensors_of(const ParamList& params);

struct Linear {
  Tensor weight;  // [d_in × d_out]
  Tensor bias;    // [d_out]

  static Linear create(std::size_t d_in, std::size_t d_out, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(std::size_t d);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct MultiHeadAttention {
  std::size_t heads = 1;
  Linear query, key, value, output;

  static MultiHeadAttention create(std::size_t d, std::size_t heads, Rng& rng);
  // Per head softmax(QKᵀ/√d_head)·V, heads concatenated then projected.
  // q_in rows are batch·n_q, k_in/v_in rows batch·n_k.
  Tensor forward(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, std::size_t batch,
                 std::vector<double>* probs = nullptr) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct DecoderConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 128;
  bool cross_attention = true;
};

// Attention weights captured during one decoder layer forward, laid out
// [batch][head][rows][cols].
struct LayerTrace {
  std::vector<double> self_attention;
  std::vector<double> cross_attention;
};

// Post-norm decoder layer: self-attention, cross-attention (keys and values
// given separately), then a GELU feed-forward, each with residual + LayerNorm.
struct DecoderLayer {
  MultiHeadAttention self_attn;
  std::optional<MultiHeadAttention> cross_attn;
  LayerNorm norm_self, norm_cross, norm_ffn;
  Linear ffn_in, ffn_out;

  static DecoderLayer create(const DecoderConfig& config, Rng& rng);
  Tensor forward(const Tensor& tokens, const Tensor& mem_keys, const Tensor& mem_values, std::size_t batch,
                 LayerTrace* trace = nullptr) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct SgdOptions {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

class Sgd {
 public:
  Sgd(std::vector<Tensor> params, SgdOptions options);

  // v ← μ·v + g + wd·θ; θ ← θ − lr·v; grads released afterwards.
  // MissingGradient if any parameter has no grad buffer.
  void step();
  void zero_grad();

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  SgdOptions options_;
};

// lr0·(1 + cos(π·t/T))/2, clamped to t ∈ [0, T].
double cosine_lr(double lr0, double t, double horizon);

// Divides the rate by `factor` once the monitored value (lower is better) has
// failed to improve for more than `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr0, std::size_t patience, double factor = 10.0);

  double step(double metric);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  std::optional<double> best_;
  std::size_t bad_epochs_ = 0;
};

}  // namespace l2l
