#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "l2l/tensor.hpp"

namespace l2l {

// Probabilities are clamped to [ε, 1−ε] before the logarithm.
inline constexpr double kProbClamp = 1e-12;

enum class WeightKind { Uniform, Exponential };

std::string_view weight_kind_name(WeightKind kind);
WeightKind parse_weight_kind(std::string_view name);

// w_j = y_j·e^{1−γ_j} + (1−y_j)·e^{γ_j}. GammaOutOfRange unless γ ∈ [0, 1].
double attribute_weight(double gamma, std::uint8_t y);

struct WeightScheme {
  WeightKind kind = WeightKind::Uniform;
  std::vector<double> gamma;  // positive ratio per attribute (exponential only)

  static WeightScheme uniform() { return {}; }
  static WeightScheme exponential(std::vector<double> gamma);

  // Per-entry weights for a flat [batch·M] label block.
  std::vector<double> weights(std::span<const std::uint8_t> labels, std::size_t num_attributes) const;
};

// −Σ w_j (y_j log p_j + (1−y_j) log(1−p_j)) over every entry of `probs`.
// With clamp disabled, saturated probabilities raise NonFiniteLoss.
Tensor bce_loss(const Tensor& probs, std::span<const std::uint8_t> labels, std::span<const double> weights,
                bool clamp_probs = true);

struct LossTerms {
  Tensor aqn;
  Tensor mlm;
  Tensor total;
};

// L_aqn + λ·L_mlm, each a bce_loss summed over attributes and averaged over
// the batch.
LossTerms total_loss(const Tensor& l, const Tensor& p, std::span<const std::uint8_t> labels, double lambda,
                     const WeightScheme& scheme, std::size_t num_attributes);

}  // namespace l2l
