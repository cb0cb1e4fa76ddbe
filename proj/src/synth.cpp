#include "l2l/synth.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "l2l/error.hpp"
#include "l2l/rng.hpp"
#include "l2l/tensor_io.hpp"

namespace l2l {

namespace {
constexpr std::uint64_t kSplitStream = 0x5B117ULL;
constexpr std::size_t kPatch = 4;
}  // namespace

void SynthSpec::finalize() {
  auto fail = [](const std::string& why) { return Error(ErrorCode::ConfigError, "synthetic spec: " + why); };
  if (num_attributes == 0) throw fail("need at least one attribute");
  if (num_factors == 0 || num_factors > num_attributes) throw fail("need 1 <= K <= M");
  if (!(flip_eps >= 0.0 && flip_eps < 1.0)) throw fail("flip_eps must lie in [0, 1)");
  if (!(occlusion_rho >= 0.0 && occlusion_rho < 1.0)) throw fail("occlusion_rho must lie in [0, 1)");
  if (!(noise_sigma >= 0.0)) throw fail("noise_sigma must be non-negative");
  if (image_size == 0 || image_size % 4 != 0) throw fail("image_size must be a positive multiple of 4");
  if (num_attributes > grid() * grid()) throw fail("more attributes than 4x4 patches in the image");
  if (attr_map.empty()) {
    for (std::size_t j = 0; j < num_attributes; ++j) attr_map.push_back(j % num_factors);
  }
  if (attr_map.size() != num_attributes) throw fail("attr_map length differs from M");
  for (std::size_t g : attr_map) {
    if (g >= num_factors) throw fail("attr_map entry outside [0, K)");
  }
}

std::size_t SynthSpec::patch_cell(std::size_t j) const { return j * grid() * grid() / num_attributes; }

nlohmann::ordered_json SynthSpec::to_json() const {
  nlohmann::ordered_json j;
  j["num_attributes"] = num_attributes;
  j["num_factors"] = num_factors;
  j["attr_map"] = attr_map;
  j["flip_eps"] = flip_eps;
  j["occlusion_rho"] = occlusion_rho;
  j["image_size"] = image_size;
  j["noise_sigma"] = noise_sigma;
  j["seed"] = seed;
  return j;
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  try {
    SynthSpec s;
    s.num_attributes = j.at("num_attributes").get<std::size_t>();
    s.num_factors = j.at("num_factors").get<std::size_t>();
    s.attr_map = j.at("attr_map").get<std::vector<std::size_t>>();
    s.flip_eps = j.at("flip_eps").get<double>();
    s.occlusion_rho = j.at("occlusion_rho").get<double>();
    s.image_size = j.at("image_size").get<std::size_t>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.finalize();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestError, std::string("generator spec: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ManifestError, e.what());
  }
}

double patch_pattern(std::uint8_t value, std::size_t row, std::size_t col) {
  if (value) return (row + 3 - col % 3) % 3 == 0 ? 1.0 : 0.0;
  return (row + col) % 3 == 0 ? 1.0 : 0.0;
}

SynthSample generate_sample(const SynthSpec& spec, std::size_t id) {
  Rng rng = Rng::derive(spec.seed, id);
  SynthSample s;
  s.id = id;
  const std::size_t m = spec.num_attributes;
  s.latent.resize(spec.num_factors);
  for (auto& z : s.latent) z = rng.bernoulli(0.5) ? 1 : 0;
  s.labels.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const bool flip = rng.bernoulli(spec.flip_eps);
    s.labels[j] = static_cast<std::uint8_t>(s.latent[spec.attr_map[j]] ^ (flip ? 1 : 0));
  }
  s.occluded.resize(m);
  for (auto& o : s.occluded) o = rng.bernoulli(spec.occlusion_rho) ? 1 : 0;

  const std::size_t size = spec.image_size;
  s.image.assign(size * size, 0.0);
  for (double& px : s.image) px = spec.noise_sigma * rng.normal();
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t cell = spec.patch_cell(j);
    const std::size_t top = (cell / spec.grid()) * kPatch, left = (cell % spec.grid()) * kPatch;
    for (std::size_t r = 0; r < kPatch; ++r) {
      for (std::size_t c = 0; c < kPatch; ++c) {
        double& px = s.image[(top + r) * size + left + c];
        px = s.occluded[j] ? 0.0 : px + patch_pattern(s.labels[j], r, c);
      }
    }
  }
  return s;
}

SplitCounts SplitCounts::from_total(std::size_t n) {
  SplitCounts c;
  c.val = n / 10;
  c.test = n / 10;
  c.train = n - c.val - c.test;
  return c;
}

void generate_dataset(const SynthSpec& input_spec, const SplitCounts& counts, const std::filesystem::path& out_dir) {
  SynthSpec spec = input_spec;
  spec.finalize();
  const std::size_t n = counts.total();
  if (n == 0) throw Error(ErrorCode::ConfigError, "dataset needs at least one sample");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const std::size_t m = spec.num_attributes;
  std::ostringstream labels_csv, hidden_csv;
  labels_csv << "sample_id";
  for (std::size_t j = 0; j < m; ++j) labels_csv << ",attr_" << j;
  labels_csv << '\n';
  hidden_csv << "sample_id";
  for (std::size_t k = 0; k < spec.num_factors; ++k) hidden_csv << ",z_" << k;
  for (std::size_t j = 0; j < m; ++j) hidden_csv << ",occluded_" << j;
  hidden_csv << '\n';

  for (std::size_t id = 0; id < n; ++id) {
    const SynthSample s = generate_sample(spec, id);
    write_tensor(out_dir / ("sample_" + std::to_string(id) + ".l2lt"),
                 Tensor::from({spec.image_size, spec.image_size, 1}, s.image));
    labels_csv << id;
    for (auto v : s.labels) labels_csv << ',' << int(v);
    labels_csv << '\n';
    hidden_csv << id;
    for (auto v : s.latent) hidden_csv << ',' << int(v);
    for (auto v : s.occluded) hidden_csv << ',' << int(v);
    hidden_csv << '\n';
  }

  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  Rng split_rng = Rng::derive(spec.seed, kSplitStream);
  split_rng.shuffle(ids);
  auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> part(ids.begin() + static_cast<long>(from), ids.begin() + static_cast<long>(from + count));
    std::sort(part.begin(), part.end());
    return part;
  };

  nlohmann::ordered_json manifest;
  manifest["format"] = "l2l-dataset";
  manifest["version"] = 1;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) names.push_back("attr_" + std::to_string(j));
  manifest["attribute_names"] = names;
  manifest["num_samples"] = n;
  manifest["image_shape"] = {spec.image_size, spec.image_size, 1};
  manifest["labels"] = "labels.csv";
  manifest["hidden"] = "hidden.csv";
  manifest["image_pattern"] = "sample_{id}.l2lt";
  manifest["splits"]["train"] = take(0, counts.train);
  manifest["splits"]["val"] = take(counts.train, counts.val);
  manifest["splits"]["test"] = take(counts.train + counts.val, counts.test);
  manifest["generator"] = spec.to_json();

  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (out_dir / name).string());
    out << text;
  };
  write_text("labels.csv", labels_csv.str());
  write_text("hidden.csv", hidden_csv.str());
  write_text("manifest.json", manifest.dump(2) + "\n");
}

std::vector<double> bayes_oracle(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> occluded,
                                 const SynthSpec& spec) {
  const std::size_t m = spec.num_attributes, k = spec.num_factors;
  if (k > 16) throw Error(ErrorCode::KTooLarge, "enumeration over 2^" + std::to_string(k) + " configurations");
  if (labels.size() != m || occluded.size() != m || spec.attr_map.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, "oracle inputs do not match the generator settings");
  }
  const double eps = spec.flip_eps;
  std::vector<double> q(m, 0.0);
  double evidence = 0.0;
  for (std::uint32_t config = 0; config < (1u << k); ++config) {
    double like = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (occluded[j]) continue;
      const std::uint8_t z = (config >> spec.attr_map[j]) & 1u;
      like *= (labels[j] == z) ? 1.0 - eps : eps;
    }
    evidence += like;
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint8_t z = (config >> spec.attr_map[j]) & 1u;
      const double p_one = occluded[j] ? (z ? 1.0 - eps : eps) : static_cast<double>(labels[j]);
      q[j] += like * p_one;
    }
  }
  for (double& v : q) v /= evidence;
  return q;
}

}  // namespace l2l
