// Command-line front end over the label2label C API.

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "label2label.h"

namespace {

constexpr int kUsageExit = 2;

const std::vector<std::pair<std::string, std::string>> kOptions = {
    {"m", "number of attributes (generate)"},
    {"k", "number of latent factors (generate)"},
    {"eps", "label flip probability (generate)"},
    {"rho", "patch occlusion probability (generate)"},
    {"n", "total samples, split 80/10/10 (generate)"},
    {"n_train", "explicit train split size (generate)"},
    {"n_val", "explicit validation split size (generate)"},
    {"n_test", "explicit test split size (generate)"},
    {"image_size", "image side in pixels, a multiple of 4 (generate)"},
    {"noise", "pixel noise sigma (generate)"},
    {"mode", "fc_head | aqn_only | label2label | mlm_no_image | two_stage"},
    {"d", "model width"},
    {"heads", "attention heads"},
    {"ffn_hidden", "feed-forward hidden width"},
    {"aqn_layers", "AQN decoder layers (L)"},
    {"mlm_layers", "IC-MLM decoder layers (D)"},
    {"conv1", "first convolution channels"},
    {"conv2", "second convolution channels"},
    {"pos_embedding", "add 2-D positional embeddings to cross-attention keys"},
    {"mask_strategy", "attribute_specific | attribute_agnostic | zero_vector"},
    {"alpha", "mask ratio"},
    {"lambda", "IC-MLM loss coefficient"},
    {"weighting", "uniform | exponential"},
    {"lr", "initial learning rate"},
    {"momentum", "SGD momentum"},
    {"weight_decay", "L2 weight decay"},
    {"scheduler", "none | cosine | plateau"},
    {"patience", "plateau scheduler patience in epochs"},
    {"epochs", "training epochs"},
    {"batch_size", "minibatch size"},
    {"seed", "seed for data, initialization, masking and ordering"},
    {"grad_clip", "global gradient norm cap, 0 disables"},
    {"data", "dataset directory or manifest.json"},
    {"out", "output directory"},
    {"checkpoint", "checkpoint directory"},
    {"split", "split to evaluate"},
    {"samples", "comma-separated sample ids (export-attention)"},
    {"axis", "alpha | lambda | L | D | mask_strategy (sweep)"},
    {"values", "comma-separated sweep values"},
};

struct Invocation {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_run_options(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.config_file, "key=value configuration file");
  for (const auto& [key, help] : kOptions) sub->add_option("--" + key, inv.values[key], help);
}

int report(int status) {
  if (status != L2L_OK) std::fprintf(stderr, "error: %s\n", l2l_last_error());
  return l2l_exit_code(status);
}

int run(const std::string& command, const Invocation& inv, const CLI::App* sub) {
  l2l_config raw = nullptr;
  if (const int st = l2l_config_create(&raw); st != L2L_OK) return report(st);
  std::unique_ptr<l2l_config_s, decltype(&l2l_config_free)> config(raw, l2l_config_free);
  if (!inv.config_file.empty()) {
    if (const int st = l2l_config_load_file(config.get(), inv.config_file.c_str()); st != L2L_OK) return report(st);
  }
  for (const auto& [key, value] : inv.values) {
    if (sub->count("--" + key) == 0) continue;
    if (const int st = l2l_config_set(config.get(), key.c_str(), value.c_str()); st != L2L_OK) return report(st);
  }
  return report(l2l_run_command(command.c_str(), config.get()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label2Label attribute recognition toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", l2l_version());

  std::map<std::string, Invocation> invocations;
  std::map<std::string, CLI::App*> subs;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "write a synthetic attribute dataset"},
      {"train", "train a model and save the best validation checkpoint"},
      {"eval", "score a checkpoint on one split"},
      {"sweep", "train and evaluate once per value of one axis"},
      {"export-attention", "dump attention matrices as JSON and PGM heatmaps"},
  };
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_run_options(subs[name], invocations[name]);
  }

  std::string run_json;
  std::string rerun_out;
  CLI::App* rerun = app.add_subcommand("rerun", "replay a run.json");
  rerun->add_option("run_json", run_json, "path to run.json")->required();
  rerun->add_option("--out", rerun_out, "redirect outputs to this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  if (rerun->parsed()) {
    return report(l2l_rerun(run_json.c_str(), rerun_out.empty() ? nullptr : rerun_out.c_str()));
  }
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) return run(name, invocations[name], sub);
  }
  return kUsageExit;
}
