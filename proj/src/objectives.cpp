#include "l2l/objectives.hpp"

#include <cmath>
#include <string>

namespace l2l {

std::string_view weight_kind_name(WeightKind kind) {
  return kind == WeightKind::Exponential ? "exponential" : "uniform";
}

WeightKind parse_weight_kind(std::string_view name) {
  if (name == "uniform") return WeightKind::Uniform;
  if (name == "exponential") return WeightKind::Exponential;
  throw Error(ErrorCode::ConfigError, "unknown weighting '" + std::string(name) + "'");
}

double attribute_weight(double gamma, std::uint8_t y) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::GammaOutOfRange, "gamma " + std::to_string(gamma) + " outside [0, 1]");
  }
  return y ? std::exp(1.0 - gamma) : std::exp(gamma);
}

WeightScheme WeightScheme::exponential(std::vector<double> gamma) {
  for (double g : gamma) attribute_weight(g, 0);
  return {WeightKind::Exponential, std::move(gamma)};
}

std::vector<double> WeightScheme::weights(std::span<const std::uint8_t> labels, std::size_t num_attributes) const {
  std::vector<double> w(labels.size(), 1.0);
  if (kind == WeightKind::Uniform) return w;
  if (gamma.size() != num_attributes) {
    throw Error(ErrorCode::ShapeMismatch, "weight scheme has " + std::to_string(gamma.size()) + " ratios for " +
                                              std::to_string(num_attributes) + " attributes");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = attribute_weight(gamma[i % num_attributes], labels[i]);
  return w;
}

Tensor bce_loss(const Tensor& probs, std::span<const std::uint8_t> labels, std::span<const double> weights,
                bool clamp_probs) {
  const std::size_t n = probs.numel();
  if (labels.size() != n || weights.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "bce_loss: " + std::to_string(n) + " probabilities, " +
                                              std::to_string(labels.size()) + " labels, " +
                                              std::to_string(weights.size()) + " weights");
  }
  const Tensor flat = reshape(probs, {n});
  Tensor p = flat;
  if (clamp_probs) {
    p = clamp(flat, kProbClamp, 1.0 - kProbClamp);
  } else {
    for (double v : flat.data()) {
      if (!(v > 0.0 && v < 1.0)) throw Error(ErrorCode::NonFiniteLoss, "probability saturated at " + std::to_string(v));
    }
  }
  std::vector<double> pos(n), neg(n);
  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = weights[i] * (labels[i] ? 1.0 : 0.0);
    neg[i] = weights[i] * (labels[i] ? 0.0 : 1.0);
  }
  const Tensor terms = add(mul(log(p), Tensor::from({n}, std::move(pos))),
                           mul(log(rsub(1.0, p)), Tensor::from({n}, std::move(neg))));
  return mul(sum(terms), -1.0);
}

LossTerms total_loss(const Tensor& l, const Tensor& p, std::span<const std::uint8_t> labels, double lambda,
                     const WeightScheme& scheme, std::size_t num_attributes) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::DomainError, "lambda must be non-negative");
  if (num_attributes == 0 || labels.size() % num_attributes != 0) {
    throw Error(ErrorCode::ShapeMismatch, "label block is not a whole number of sentences");
  }
  const double batch = static_cast<double>(labels.size() / num_attributes);
  const auto w = scheme.weights(labels, num_attributes);
  LossTerms out;
  out.aqn = div(bce_loss(l, labels, w), batch);
  out.mlm = div(bce_loss(p, labels, w), batch);
  out.total = add(out.aqn, mul(out.mlm, lambda));
  return out;
}

}  // namespace l2l
