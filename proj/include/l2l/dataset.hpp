#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "l2l/synth.hpp"

namespace l2l {

struct DatasetSample {
  std::size_t id = 0;
  std::vector<double> image;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> occluded;  // empty when the dataset has no hidden state
};

struct Dataset {
  std::filesystem::path root;
  std::vector<std::string> attribute_names;
  std::size_t image_size = 0;
  std::size_t channels = 1;
  std::vector<DatasetSample> samples;  // ascending id
  std::map<std::string, std::vector<std::size_t>> splits;  // name → indices into samples
  std::optional<SynthSpec> generator;

  std::size_t num_attributes() const { return attribute_names.size(); }
  const std::vector<std::size_t>& split(const std::string& name) const;
  // Index of the sample with this id; SampleNotFound otherwise.
  std::size_t index_of(std::size_t id) const;
  bool has_hidden() const { return !samples.empty() && !samples.front().occluded.empty(); }
};

// Accepts the manifest path or its directory. Errors: ManifestError,
// TensorFormatError (naming the file), LabelDomainError (row and column).
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Deterministic epoch order: a permutation seeded by (seed, epoch).
std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& indices, std::uint64_t seed, std::size_t epoch);

}  // namespace l2l
