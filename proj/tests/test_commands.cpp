#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "l2l/commands.hpp"
#include "l2l/metrics.hpp"

using namespace l2l;
using l2l::test::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig tiny_config(const fs::path& out) {
  RunConfig c;
  c.m = 4;
  c.k = 2;
  c.image_size = 8;
  c.n_train = 48;
  c.n_val = 16;
  c.n_test = 16;
  c.d = 8;
  c.heads = 2;
  c.ffn_hidden = 16;
  c.conv1 = 3;
  c.conv2 = 4;
  c.mlm_layers = 1;
  c.epochs = 2;
  c.batch_size = 16;
  c.out = out.string();
  return c;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("config keys, parsing and file loading") {
  RunConfig c;
  c.set("alpha", "0.25");
  c.set("epochs", "3");
  c.set("pos_embedding", "false");
  c.set("mode", "aqn_only");
  CHECK(c.alpha == 0.25);
  CHECK(c.epochs == 3);
  CHECK_FALSE(c.pos_embedding);
  CHECK(code_of([&] { c.set("alpah", "0.1"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("epochs", "three"); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { c.set("epochs", "-1"); }) == ErrorCode::ConfigError);

  const RunConfig back = RunConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK(RunConfig::keys().size() == c.to_json().size());

  TempDir dir("cfg");
  const fs::path file = dir.path() / "run.cfg";
  std::ofstream(file) << "# comment line\nlambda = 0.5   # trailing\n\nbatch_size=8\n";
  RunConfig loaded;
  load_config_file(file, loaded);
  CHECK(loaded.lambda == 0.5);
  CHECK(loaded.batch_size == 8);
  std::ofstream(file) << "lambda=0.5\nbogus=1\n";
  try {
    load_config_file(file, loaded);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("seed override from the environment") {
  RunConfig c;
  ::setenv("L2L_SEED", "123", 1);
  apply_env_overrides(c);
  ::unsetenv("L2L_SEED");
  CHECK(c.seed == 123);
  apply_env_overrides(c);
  CHECK(c.seed == 123);
}

TEST_CASE("validation happens before any work") {
  RunConfig c;
  CHECK(code_of([&] { validate_config("train", c); }) == ErrorCode::ConfigError);
  c.out = "/tmp/never_used";
  CHECK(code_of([&] { validate_config("train", c); }) == ErrorCode::ConfigError);  // no --data
  CHECK(code_of([&] { validate_config("deploy", c); }) == ErrorCode::ConfigError);
  RunConfig g;
  g.out = "/tmp/never_used";
  g.k = 20;
  CHECK(code_of([&] { validate_config("generate", g); }) == ErrorCode::ConfigError);
  RunConfig s;
  s.out = "/tmp/never_used";
  s.data = "/tmp/never_used";
  s.axis = "alpha";
  s.values = "0.1,1.7";
  CHECK(code_of([&] { validate_config("sweep", s); }) != ErrorCode::IoError);
  CHECK_FALSE(fs::exists("/tmp/never_used"));
}

TEST_CASE("content hash tracks bytes and ignores run records") {
  TempDir dir("hash");
  std::ofstream(dir.path() / "a.txt") << "alpha";
  const std::string h1 = content_hash({dir.path()});
  std::ofstream(dir.path() / "run.json") << "{}";
  CHECK(content_hash({dir.path()}) == h1);
  std::ofstream(dir.path() / "a.txt") << "alphb";
  CHECK(content_hash({dir.path()}) != h1);
  CHECK(h1.size() == 16);
  CHECK(code_of([&] { content_hash({dir.path() / "missing"}); }) == ErrorCode::IoError);
}

TEST_CASE("generate, train, eval, export and rerun") {
  TempDir root("pipeline");
  const fs::path data = root.path() / "data", train = root.path() / "train", eval = root.path() / "eval",
                 attn = root.path() / "attn";
  RunConfig gen = tiny_config(data);
  run_command("generate", gen);
  CHECK(fs::exists(data / "manifest.json"));
  CHECK(fs::exists(data / "run.json"));
  const auto run = nlohmann::json::parse(slurp(data / "run.json"));
  CHECK(run["command"] == "generate");
  CHECK(run["inputs_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);

  RunConfig tr = tiny_config(train);
  tr.data = data.string();
  run_command("train", tr);
  std::istringstream log(slurp(train / "train_log.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("L_total"));
    ++lines;
  }
  CHECK(lines == 2);
  CHECK(fs::exists(train / "checkpoint" / "model.cfg"));

  RunConfig ev = tiny_config(eval);
  ev.data = data.string();
  ev.checkpoint = (train / "checkpoint").string();
  run_command("eval", ev);
  const auto report = nlohmann::ordered_json::parse(slurp(eval / "report.json"));
  CHECK(validate_report_json(report["model"]).empty());
  CHECK(report.contains("oracle"));
  CHECK(report.contains("occluded"));
  CHECK(slurp(eval / "per_attribute.csv").rfind("attribute_name,error\n", 0) == 0);

  RunConfig ex = tiny_config(attn);
  ex.data = data.string();
  ex.checkpoint = ev.checkpoint;
  ex.samples = "3,5";
  run_command("export-attention", ex);
  const auto doc = nlohmann::json::parse(slurp(attn / "sample_3.json"));
  CHECK(doc["sample_id"] == 3);
  CHECK(doc["attention"].size() > 0);
  for (const auto& a : doc["attention"])
    for (const auto& row : a["matrix"]) {
      double total = 0;
      for (double v : row) total += v;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }

  const fs::path replay = root.path() / "eval_replay";
  rerun(eval / "run.json", replay.string());
  CHECK(slurp(replay / "report.json") == slurp(eval / "report.json"));
  CHECK(slurp(replay / "per_attribute.csv") == slurp(eval / "per_attribute.csv"));

  ex.samples = "9999";
  ex.out = (root.path() / "missing").string();
  CHECK(code_of([&] { run_command("export-attention", ex); }) == ErrorCode::SampleNotFound);

  RunConfig mismatch = tiny_config(root.path() / "regen");
  mismatch.m = 3;
  run_command("generate", mismatch);
  ev.data = mismatch.out;
  ev.out = (root.path() / "bad_eval").string();
  CHECK(code_of([&] { run_command("eval", ev); }) == ErrorCode::IncompatibleCheckpoint);
}
