#include <doctest.h>
#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "label2label.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path = fs::temp_directory_path() / ("l2l_capi_" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void set(l2l_config c, const char* key, const std::string& value) {
  REQUIRE(l2l_config_set(c, key, value.c_str()) == L2L_OK);
}

}  // namespace

TEST_CASE("status codes and exit codes") {
  CHECK(std::string(l2l_version()) == "1.0.0");
  CHECK(l2l_exit_code(L2L_OK) == 0);
  CHECK(l2l_exit_code(L2L_ERR_CONFIG) == 2);
  CHECK(l2l_exit_code(L2L_ERR_DATA) == 2);
  CHECK(l2l_exit_code(L2L_ERR_NUMERIC) == 3);
  CHECK(l2l_exit_code(L2L_ERR_INTERNAL) == 1);
  CHECK(l2l_config_create(nullptr) == L2L_ERR_ARGUMENT);
  CHECK(std::strlen(l2l_last_error()) > 0);
}

TEST_CASE("config handle") {
  l2l_config c = nullptr;
  REQUIRE(l2l_config_create(&c) == L2L_OK);
  CHECK(std::strlen(l2l_last_error()) == 0);
  CHECK(l2l_config_set(c, "lambda", "0.8") == L2L_OK);
  CHECK(l2l_config_set(c, "no_such_key", "1") == L2L_ERR_CONFIG);
  CHECK(std::string(l2l_last_error()).find("no_such_key") != std::string::npos);

  size_t needed = 0;
  char small[2];
  CHECK(l2l_config_get(c, "mode", small, sizeof small, &needed) == L2L_ERR_ARGUMENT);
  CHECK(needed == std::strlen("label2label") + 1);
  std::vector<char> buf(needed);
  CHECK(l2l_config_get(c, "mode", buf.data(), buf.size(), &needed) == L2L_OK);
  CHECK(std::string(buf.data()) == "label2label");

  CHECK(l2l_run_command("train", c) == L2L_ERR_CONFIG);  // no out, no data
  CHECK(l2l_exit_code(l2l_run_command("train", c)) == 2);
  l2l_config_free(c);
  l2l_config_free(nullptr);
}

TEST_CASE("tensor read and write") {
  Scratch s;
  const std::string file = (s.path / "t.l2lt").string();
  const size_t dims[2] = {2, 3};
  const double data[6] = {1, 2, 3, 4, 5, 6.5};
  REQUIRE(l2l_tensor_write(file.c_str(), dims, 2, data) == L2L_OK);
  size_t rank = 0, numel = 0, got_dims[4] = {};
  REQUIRE(l2l_tensor_read(file.c_str(), got_dims, 4, &rank, nullptr, 0, &numel) == L2L_OK);
  CHECK(rank == 2);
  CHECK(numel == 6);
  std::vector<double> back(numel);
  REQUIRE(l2l_tensor_read(file.c_str(), got_dims, 4, &rank, back.data(), back.size(), &numel) == L2L_OK);
  CHECK(got_dims[0] == 2);
  CHECK(got_dims[1] == 3);
  CHECK(back == std::vector<double>(data, data + 6));
  CHECK(l2l_tensor_read(file.c_str(), got_dims, 4, &rank, back.data(), 3, &numel) == L2L_ERR_ARGUMENT);
  CHECK(l2l_tensor_read((s.path / "missing.l2lt").string().c_str(), got_dims, 4, &rank, nullptr, 0, &numel) !=
        L2L_OK);
}

TEST_CASE("end to end through the C interface") {
  Scratch s;
  l2l_config c = nullptr;
  REQUIRE(l2l_config_create(&c) == L2L_OK);
  const std::pair<const char*, const char*> settings[] = {
      {"m", "4"},      {"k", "2"},       {"image_size", "8"}, {"n_train", "32"},   {"n_val", "8"},
      {"n_test", "8"}, {"d", "8"},       {"heads", "2"},      {"ffn_hidden", "16"}, {"conv1", "3"},
      {"conv2", "4"},  {"epochs", "1"},  {"batch_size", "16"}, {"mlm_layers", "1"}};
  for (const auto& [k, v] : settings) set(c, k, v);
  set(c, "out", (s.path / "data").string());
  REQUIRE(l2l_run_command("generate", c) == L2L_OK);
  set(c, "data", (s.path / "data").string());
  set(c, "out", (s.path / "train").string());
  REQUIRE(l2l_run_command("train", c) == L2L_OK);

  l2l_model model = nullptr;
  REQUIRE(l2l_model_load((s.path / "train" / "checkpoint").string().c_str(), &model) == L2L_OK);
  size_t m = 0, size = 0, channels = 0;
  CHECK(l2l_model_num_attributes(model, &m) == L2L_OK);
  CHECK(l2l_model_image_size(model, &size, &channels) == L2L_OK);
  CHECK(m == 4);
  CHECK(size == 8);
  CHECK(channels == 1);
  std::vector<double> images(2 * 64, 0.25), probs(8);
  REQUIRE(l2l_model_predict(model, images.data(), 2, probs.data(), probs.size()) == L2L_OK);
  for (double p : probs) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  CHECK(l2l_model_predict(model, images.data(), 2, probs.data(), 4) == L2L_ERR_ARGUMENT);
  l2l_model_free(model);

  CHECK(l2l_model_load((s.path / "nowhere").string().c_str(), &model) == L2L_ERR_DATA);
  CHECK(l2l_rerun((s.path / "train" / "run.json").string().c_str(), (s.path / "again").string().c_str()) == L2L_OK);
  CHECK(fs::exists(s.path / "again" / "checkpoint"));
  l2l_config_free(c);
}
