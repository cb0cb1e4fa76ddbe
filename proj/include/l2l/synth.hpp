#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace l2l {

// Correlated-attribute generator: K latent coin flips z, attribute j copies
// z_{g(j)} through an XOR with Bernoulli(flip_eps) noise, and each attribute
// renders into its own 4×4 patch unless occluded (probability occlusion_rho),
// in which case the patch is zeroed.
struct SynthSpec {
  std::size_t num_attributes = 8;
  std::size_t num_factors = 3;
  std::vector<std::size_t> attr_map;  // j → factor; defaults to j mod K
  double flip_eps = 0.05;
  double occlusion_rho = 0.3;
  std::size_t image_size = 16;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;

  // Fills attr_map when empty and checks every invariant (ConfigError).
  void finalize();
  std::size_t grid() const { return image_size / 4; }
  // Grid cell owning attribute j's patch.
  std::size_t patch_cell(std::size_t j) const;

  nlohmann::ordered_json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthSample {
  std::size_t id = 0;
  std::vector<double> image;  // image_size² pixels, one channel
  std::vector<std::uint8_t> labels;
  // Hidden state, kept only for oracle evaluation.
  std::vector<std::uint8_t> latent;
  std::vector<std::uint8_t> occluded;
};

// Deterministic in (spec.seed, id).
SynthSample generate_sample(const SynthSpec& spec, std::size_t id);

// 1 = diagonal stripes (value 1), 0 = anti-diagonal (value 0), on a 4×4 patch.
double patch_pattern(std::uint8_t value, std::size_t row, std::size_t col);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + val + test; }
  // 80/10/10 with rounding slack going to train.
  static SplitCounts from_total(std::size_t n);
};

// Writes labels.csv, hidden.csv, sample_{id}.l2lt and manifest.json under
// out_dir. Split membership is a seeded permutation of the ids.
void generate_dataset(const SynthSpec& spec, const SplitCounts& counts, const std::filesystem::path& out_dir);

// Exact P(y_j = 1 | visible patches) by enumerating all 2^K latent
// configurations under a uniform prior. Visible patches reveal their label.
// KTooLarge beyond K = 16.
std::vector<double> bayes_oracle(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> occluded,
                                 const SynthSpec& spec);

}  // namespace l2l
