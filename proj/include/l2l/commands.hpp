#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace l2l {

// Every setting a command can read. Keys match the CLI flag names.
struct RunConfig {
  // dataset generation
  std::size_t m = 8;
  std::size_t k = 3;
  double eps = 0.05;
  double rho = 0.3;
  std::size_t n = 1000;
  std::size_t n_train = 0;  // explicit split sizes override the 80/10/10 split of n
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::size_t image_size = 16;
  double noise = 0.05;

  // model
  std::string mode = "label2label";
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 128;
  std::size_t aqn_layers = 1;
  std::size_t mlm_layers = 2;
  std::size_t conv1 = 16;
  std::size_t conv2 = 32;
  bool pos_embedding = true;
  std::string mask_strategy = "attribute_specific";

  // training
  double alpha = 0.1;
  double lambda = 1.0;
  std::string weighting = "uniform";
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::string scheduler = "cosine";
  std::size_t patience = 4;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  double grad_clip = 5.0;

  // paths and command arguments
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string split = "test";
  std::string samples;  // comma-separated sample ids
  std::string axis;     // alpha | lambda | L | D | mask_strategy
  std::string values;   // comma-separated sweep values

  // ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  static const std::vector<std::string>& keys();
};

// Flat key=value lines; '#' starts a comment. Unknown keys are rejected.
void load_config_file(const std::filesystem::path& path, RunConfig& config);

// L2L_SEED, when set, replaces the seed.
void apply_env_overrides(RunConfig& config);

// Checks the settings `command` depends on before any work starts.
void validate_config(const std::string& command, const RunConfig& config);

// FNV-1a 64 over every regular file under the given paths, visited in sorted
// order as (relative path, size, bytes). run.json files are skipped.
std::string content_hash(const std::vector<std::filesystem::path>& inputs);

// Runs generate | train | eval | sweep | export-attention and writes run.json
// under config.out. Returns the command's summary document.
nlohmann::ordered_json run_command(const std::string& command, RunConfig config);

// Replays a run.json, optionally redirecting its outputs.
nlohmann::ordered_json rerun(const std::filesystem::path& run_json, const std::optional<std::string>& out = std::nullopt);

const std::vector<std::string>& command_names();

}  // namespace l2l
