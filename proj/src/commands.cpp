#include "l2l/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "l2l/dataset.hpp"
#include "l2l/model.hpp"
#include "l2l/synth.hpp"
#include "l2l/tensor_io.hpp"
#include "l2l/trainer.hpp"

namespace l2l {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// ---- value parsing ----------------------------------------------------------

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::ConfigError, "invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

std::size_t parse_unsigned(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, value, "a finite number");
  return out;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<ordered_json(const RunConfig&)> get;
};

template <class T>
Field field(const char* key, T RunConfig::*member) {
  return {key,
          [key, member](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) {
              c.*member = parse_flag(key, v);
            } else if constexpr (std::is_same_v<T, double>) {
              c.*member = parse_real(key, v);
            } else if constexpr (std::is_same_v<T, std::string>) {
              c.*member = v;
            } else {
              c.*member = parse_unsigned(key, v);
            }
          },
          [member](const RunConfig& c) { return ordered_json(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("m", &RunConfig::m),
      field("k", &RunConfig::k),
      field("eps", &RunConfig::eps),
      field("rho", &RunConfig::rho),
      field("n", &RunConfig::n),
      field("n_train", &RunConfig::n_train),
      field("n_val", &RunConfig::n_val),
      field("n_test", &RunConfig::n_test),
      field("image_size", &RunConfig::image_size),
      field("noise", &RunConfig::noise),
      field("mode", &RunConfig::mode),
      field("d", &RunConfig::d),
      field("heads", &RunConfig::heads),
      field("ffn_hidden", &RunConfig::ffn_hidden),
      field("aqn_layers", &RunConfig::aqn_layers),
      field("mlm_layers", &RunConfig::mlm_layers),
      field("conv1", &RunConfig::conv1),
      field("conv2", &RunConfig::conv2),
      field("pos_embedding", &RunConfig::pos_embedding),
      field("mask_strategy", &RunConfig::mask_strategy),
      field("alpha", &RunConfig::alpha),
      field("lambda", &RunConfig::lambda),
      field("weighting", &RunConfig::weighting),
      field("lr", &RunConfig::lr),
      field("momentum", &RunConfig::momentum),
      field("weight_decay", &RunConfig::weight_decay),
      field("scheduler", &RunConfig::scheduler),
      field("patience", &RunConfig::patience),
      field("epochs", &RunConfig::epochs),
      field("batch_size", &RunConfig::batch_size),
      field("seed", &RunConfig::seed),
      field("grad_clip", &RunConfig::grad_clip),
      field("data", &RunConfig::data),
      field("out", &RunConfig::out),
      field("checkpoint", &RunConfig::checkpoint),
      field("split", &RunConfig::split),
      field("samples", &RunConfig::samples),
      field("axis", &RunConfig::axis),
      field("values", &RunConfig::values),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

void require(const std::string& value, const char* key) {
  if (value.empty()) throw Error(ErrorCode::ConfigError, std::string("missing --") + key);
}

void require_range(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigError, what);
}

// ---- config translation -----------------------------------------------------

SynthSpec synth_spec(const RunConfig& c) {
  SynthSpec spec;
  spec.num_attributes = c.m;
  spec.num_factors = c.k;
  spec.flip_eps = c.eps;
  spec.occlusion_rho = c.rho;
  spec.image_size = c.image_size;
  spec.noise_sigma = c.noise;
  spec.seed = c.seed;
  spec.finalize();
  return spec;
}

ModelConfig model_config(const RunConfig& c, std::size_t num_attributes, std::size_t image_size,
                         std::size_t channels) {
  ModelConfig mc;
  mc.mode = parse_mode(c.mode);
  mc.num_attributes = num_attributes;
  mc.image_size = image_size;
  mc.channels = channels;
  mc.conv1_channels = c.conv1;
  mc.conv2_channels = c.conv2;
  mc.d = c.d;
  mc.heads = c.heads;
  mc.ffn_hidden = c.ffn_hidden;
  mc.aqn_layers = c.aqn_layers;
  mc.mlm_layers = c.mlm_layers;
  mc.pos_embedding = c.pos_embedding;
  mc.mask_strategy = parse_mask_strategy(c.mask_strategy);
  mc.init_seed = c.seed;
  return mc;
}

TrainOptions train_options(const RunConfig& c) {
  TrainOptions to;
  to.alpha = c.alpha;
  to.lambda = c.lambda;
  to.weighting = parse_weight_kind(c.weighting);
  to.sgd.learning_rate = c.lr;
  to.sgd.momentum = c.momentum;
  to.sgd.weight_decay = c.weight_decay;
  to.scheduler = parse_scheduler(c.scheduler);
  to.patience = c.patience;
  to.epochs = c.epochs;
  to.batch_size = c.batch_size;
  to.seed = c.seed;
  to.grad_clip = c.grad_clip;
  return to;
}

void validate_training(const RunConfig& c) {
  (void)parse_mode(c.mode);
  (void)parse_mask_strategy(c.mask_strategy);
  (void)parse_weight_kind(c.weighting);
  (void)parse_scheduler(c.scheduler);
  require_range(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must lie in [0, 1]");
  require_range(c.lambda >= 0.0, "lambda must be non-negative");
  require_range(c.lr > 0.0, "lr must be positive");
  require_range(c.momentum >= 0.0 && c.momentum < 1.0, "momentum must lie in [0, 1)");
  require_range(c.weight_decay >= 0.0, "weight_decay must be non-negative");
  require_range(c.grad_clip >= 0.0, "grad_clip must be non-negative");
  require_range(c.epochs >= 1, "epochs must be at least 1");
  require_range(c.batch_size >= 1, "batch_size must be at least 1");
  model_config(c, 1, c.image_size, 1).validate();
}

// ---- shared helpers ---------------------------------------------------------

fs::path dataset_root(const std::string& data) {
  fs::path p(data);
  return fs::is_regular_file(p) ? p.parent_path() : p;
}

Label2LabelModel load_compatible(const RunConfig& c, const Dataset& data) {
  Label2LabelModel model = Label2LabelModel::load(c.checkpoint);
  const auto& mc = model.config();
  if (mc.num_attributes != data.num_attributes() || mc.image_size != data.image_size ||
      mc.channels != data.channels) {
    throw Error(ErrorCode::IncompatibleCheckpoint,
                "checkpoint expects M=" + std::to_string(mc.num_attributes) + ", " +
                    std::to_string(mc.image_size) + "px images; dataset has M=" +
                    std::to_string(data.num_attributes()) + ", " + std::to_string(data.image_size) + "px");
  }
  return model;
}

double masked_error(const BinaryMatrix& preds, const BinaryMatrix& labels, const std::vector<std::uint8_t>& mask,
                    std::size_t& entries) {
  std::size_t wrong = 0;
  entries = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++entries;
    wrong += preds.values[i] != labels.values[i];
  }
  return entries ? static_cast<double>(wrong) / static_cast<double>(entries) : 0.0;
}

// ---- commands -------------------------------------------------------------

ordered_json do_generate(const RunConfig& c) {
  const SynthSpec spec = synth_spec(c);
  const SplitCounts counts = (c.n_train + c.n_val + c.n_test) > 0 ? SplitCounts{c.n_train, c.n_val, c.n_test}
                                                                  : SplitCounts::from_total(c.n);
  require_range(counts.total() > 0, "dataset must contain at least one sample");
  generate_dataset(spec, counts, c.out);
  ordered_json s;
  s["num_samples"] = counts.total();
  s["splits"] = {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}};
  return s;
}

ordered_json do_train(const RunConfig& c) {
  const Dataset data = load_dataset(c.data);
  Label2LabelModel model =
      Label2LabelModel::create(model_config(c, data.num_attributes(), data.image_size, data.channels));
  const fs::path out(c.out);
  std::ofstream log(out / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw Error(ErrorCode::IoError, "cannot write " + (out / "train_log.jsonl").string());

  std::size_t best_epoch = 0;
  double best_error = 0.0;
  const auto logs = train_model(model, data, train_options(c), [&](const EpochLog& e, bool improved) {
    log << epoch_log_json(e).dump() << '\n';
    log.flush();
    if (improved) {
      model.save(out / "checkpoint");
      best_epoch = e.epoch;
      best_error = e.val.mean_error;
    }
  });
  if (best_epoch == 0) {
    model.save(out / "checkpoint");
    best_epoch = logs.back().epoch;
    best_error = logs.back().val.mean_error;
  }
  ordered_json s;
  s["epochs"] = logs.size();
  s["best_epoch"] = best_epoch;
  s["best_val_mean_error"] = best_error;
  s["final"] = epoch_log_json(logs.back());
  return s;
}

ordered_json do_eval(const RunConfig& c) {
  const Dataset data = load_dataset(c.data);
  const Label2LabelModel model = load_compatible(c, data);
  const auto& indices = data.split(c.split);
  if (indices.empty()) throw Error(ErrorCode::ManifestError, "split '" + c.split + "' is empty");
  const SplitPredictions sp = predict_split(model, data, indices, 64);
  const bool has_mlm = model.config().has_icmlm();
  const BinaryMatrix aqn_preds(sp.labels.rows, sp.labels.cols, readout(sp.aqn_probs));

  ordered_json report;
  report["mode"] = mode_name(model.config().mode);
  report["split"] = c.split;
  report["head"] = has_mlm ? "icmlm" : "aqn";
  const MetricReport main = evaluate(sp.preds, sp.labels);
  report["model"] = report_to_json(main);
  if (has_mlm) report["aqn"] = report_to_json(evaluate(aqn_preds, sp.labels));

  if (data.generator && data.has_hidden()) {
    const std::size_t m = data.num_attributes();
    std::vector<std::uint8_t> oracle, occluded;
    for (std::size_t i : indices) {
      const auto& s = data.samples[i];
      const auto post = bayes_oracle(s.labels, s.occluded, *data.generator);
      const auto r = readout(post);
      oracle.insert(oracle.end(), r.begin(), r.end());
      occluded.insert(occluded.end(), s.occluded.begin(), s.occluded.end());
    }
    const BinaryMatrix oracle_preds(indices.size(), m, std::move(oracle));
    report["oracle"] = report_to_json(evaluate(oracle_preds, sp.labels));

    // Majority value of each attribute over the training split.
    const auto gamma = positive_ratios(data, data.split("train"));
    std::vector<std::uint8_t> majority;
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) majority.push_back(gamma[j] > 0.5 ? 1 : 0);
    const BinaryMatrix majority_preds(indices.size(), m, std::move(majority));

    std::size_t entries = 0;
    ordered_json occ;
    occ["model_error"] = masked_error(sp.preds, sp.labels, occluded, entries);
    occ["aqn_error"] = masked_error(aqn_preds, sp.labels, occluded, entries);
    occ["oracle_error"] = masked_error(oracle_preds, sp.labels, occluded, entries);
    occ["marginal_majority_error"] = masked_error(majority_preds, sp.labels, occluded, entries);
    occ["entries"] = entries;
    report["occluded"] = occ;
  }

  const fs::path out(c.out);
  write_text(out / "report.json", report.dump(2) + "\n");
  write_text(out / "per_attribute.csv", per_attribute_csv(data.attribute_names, main.per_attribute_error));
  return report;
}

void apply_axis(RunConfig& c, const std::string& axis, const std::string& value) {
  if (axis == "alpha") c.set("alpha", value);
  else if (axis == "lambda") c.set("lambda", value);
  else if (axis == "L") c.set("aqn_layers", value);
  else if (axis == "D") c.set("mlm_layers", value);
  else if (axis == "mask_strategy") c.set("mask_strategy", value);
  else throw Error(ErrorCode::ConfigError, "unknown sweep axis '" + axis + "' (alpha, lambda, L, D, mask_strategy)");
}

ordered_json do_sweep(const RunConfig& c) {
  const fs::path out(c.out);
  std::string csv = "value,mean_error,mA,f1\n";
  ordered_json rows = ordered_json::array();
  for (const auto& value : split_list(c.values)) {
    const fs::path dir = out / (c.axis + "_" + value);
    RunConfig train = c;
    apply_axis(train, c.axis, value);
    train.axis.clear();
    train.values.clear();
    train.out = (dir / "train").string();
    run_command("train", train);

    RunConfig eval = train;
    eval.checkpoint = (dir / "train" / "checkpoint").string();
    eval.out = (dir / "eval").string();
    const ordered_json report = run_command("eval", eval);
    const auto& model = report.at("model");
    const std::string ma = model.at("mA").is_null() ? "" : format_number(model.at("mA").get<double>());
    csv += value + "," + format_number(model.at("mean_error").get<double>()) + "," + ma + "," +
           format_number(model.at("f1").get<double>()) + "\n";
    rows.push_back({{"value", value}, {"mean_error", model.at("mean_error")}, {"mA", model.at("mA")}, {"f1", model.at("f1")}});
  }
  write_text(out / ("sweep_" + c.axis + ".csv"), csv);
  ordered_json s;
  s["axis"] = c.axis;
  s["rows"] = rows;
  return s;
}

void write_pgm(const fs::path& path, std::size_t width, std::size_t height, const std::vector<double>& values) {
  const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  std::string bytes = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (double v : values) {
    const double scaled = peak > 0.0 ? std::round(255.0 * std::clamp(v / peak, 0.0, 1.0)) : 0.0;
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  write_text(path, bytes);
}

// Appends one entry per (layer, head) of a trace. Cross-attention maps are
// tiled left to right, one H×W block per attribute, in the heatmap.
void export_trace(const DecoderTrace& trace, const std::string& network, const std::vector<std::string>& row_labels,
                  std::size_t heads, std::size_t grid_h, std::size_t grid_w, const std::string& stem, const fs::path& out,
                  ordered_json& entries) {
  const std::size_t m = row_labels.size();
  for (std::size_t layer = 0; layer < trace.layers.size(); ++layer) {
    const auto& lt = trace.layers[layer];
    for (const bool cross : {false, true}) {
      const auto& flat = cross ? lt.cross_attention : lt.self_attention;
      if (flat.empty()) continue;
      const std::size_t cols = cross ? grid_h * grid_w : m;
      const std::string kind = cross ? "cross_attention" : "self_attention";
      for (std::size_t h = 0; h < heads; ++h) {
        const auto first = flat.begin() + static_cast<std::ptrdiff_t>(h * m * cols);
        std::vector<double> block(first, first + static_cast<std::ptrdiff_t>(m * cols));
        ordered_json matrix = ordered_json::array();
        for (std::size_t r = 0; r < m; ++r)
          matrix.push_back(std::vector<double>(block.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                               block.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
        ordered_json e;
        e["network"] = network;
        e["kind"] = kind;
        e["layer"] = layer;
        e["head"] = h;
        e["row_labels"] = row_labels;
        if (cross) e["grid"] = {grid_h, grid_w};
        e["matrix"] = matrix;
        entries.push_back(e);

        const std::string name =
            stem + "_" + network + "_" + kind + "_l" + std::to_string(layer) + "_h" + std::to_string(h) + ".pgm";
        if (!cross) {
          write_pgm(out / name, m, m, block);
        } else {
          std::vector<double> tiled(m * cols);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t y = 0; y < grid_h; ++y)
              for (std::size_t x = 0; x < grid_w; ++x)
                tiled[y * (m * grid_w) + r * grid_w + x] = block[r * cols + y * grid_w + x];
          write_pgm(out / name, m * grid_w, grid_h, tiled);
        }
      }
    }
  }
}

ordered_json do_export_attention(const RunConfig& c) {
  const Dataset data = load_dataset(c.data);
  const Label2LabelModel model = load_compatible(c, data);
  const auto ids = split_list(c.samples);
  if (ids.empty()) throw Error(ErrorCode::ConfigError, "missing --samples");
  const fs::path out(c.out);
  ordered_json files = ordered_json::array();
  for (const auto& id_text : ids) {
    const std::size_t id = parse_unsigned("samples", id_text);
    const auto& sample = data.samples[data.index_of(id)];
    const Tensor image = stack_images({&sample.image}, data.image_size, data.channels);
    ForwardOptions fo;
    fo.trace = true;
    NoGradGuard no_grad;
    const ForwardPass pass = model.forward(image, fo);
    const auto pseudo = readout(pass.aqn.probs.data());
    const auto final = readout(pass.final_probs().data());

    std::vector<std::string> rows;
    for (std::size_t j = 0; j < data.num_attributes(); ++j)
      rows.push_back(data.attribute_names[j] + "=" + std::to_string(pseudo[j]));

    const std::string stem = "sample_" + std::to_string(id);
    ordered_json doc;
    doc["sample_id"] = id;
    doc["mode"] = mode_name(model.config().mode);
    doc["labels"] = sample.labels;
    doc["pseudo_sentence"] = pseudo;
    doc["prediction"] = final;
    ordered_json entries = ordered_json::array();
    const std::size_t heads = model.config().heads;
    export_trace(pass.aqn_trace, "aqn", rows, heads, pass.features.height, pass.features.width, stem, out, entries);
    export_trace(pass.mlm_trace, "icmlm", rows, heads, pass.features.height, pass.features.width, stem, out, entries);
    doc["attention"] = entries;
    write_text(out / (stem + ".json"), doc.dump(2) + "\n");
    files.push_back(stem + ".json");
  }
  ordered_json s;
  s["files"] = files;
  return s;
}

std::vector<fs::path> command_inputs(const std::string& command, const RunConfig& c) {
  if (command == "train" || command == "sweep") return {dataset_root(c.data)};
  if (command == "eval" || command == "export-attention") return {dataset_root(c.data), fs::path(c.checkpoint)};
  return {};
}

}  // namespace

// ---- RunConfig ----------------------------------------------------------------

void RunConfig::set(const std::string& key, const std::string& value) { find_field(key).set(*this, value); }

ordered_json RunConfig::to_json() const {
  ordered_json j;
  for (const auto& f : fields()) j[f.key] = f.get(*this);
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) c.set(key, value.get<std::string>());
    else if (value.is_boolean()) c.set(key, value.get<bool>() ? "true" : "false");
    else if (value.is_number()) c.set(key, value.dump());
    else throw Error(ErrorCode::ConfigError, "config key '" + key + "' has a non-scalar value");
  }
  return c;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return names;
}

void load_config_file(const fs::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_env_overrides(RunConfig& config) {
  if (const char* seed = std::getenv("L2L_SEED"); seed && *seed) config.set("seed", seed);
}

void validate_config(const std::string& command, const RunConfig& c) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw Error(ErrorCode::ConfigError, "unknown command '" + command + "'");
  }
  require(c.out, "out");
  if (command == "generate") {
    (void)synth_spec(c);
    return;
  }
  require(c.data, "data");
  if (command == "train") {
    validate_training(c);
  } else if (command == "eval") {
    require(c.checkpoint, "checkpoint");
    require(c.split, "split");
  } else if (command == "sweep") {
    require(c.axis, "axis");
    const auto values = split_list(c.values);
    if (values.empty()) throw Error(ErrorCode::ConfigError, "missing --values");
    for (const auto& v : values) {
      RunConfig probe = c;
      apply_axis(probe, c.axis, v);
      validate_training(probe);
    }
  } else if (command == "export-attention") {
    require(c.checkpoint, "checkpoint");
    require(c.samples, "samples");
    for (const auto& id : split_list(c.samples)) (void)parse_unsigned("samples", id);
  }
}

std::string content_hash(const std::vector<fs::path>& inputs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view bytes) {
    for (unsigned char ch : bytes) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& root : inputs) {
    std::vector<fs::path> files;
    if (fs::is_regular_file(root)) {
      files.push_back(root);
    } else if (fs::is_directory(root)) {
      for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().filename() != "run.json") files.push_back(entry.path());
    } else {
      throw Error(ErrorCode::IoError, "input " + root.string() + " does not exist");
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const auto bytes = read_file_bytes(file);
      const std::string rel = fs::is_directory(root) ? fs::relative(file, root).generic_string() : file.filename().string();
      mix(rel);
      mix(std::string_view("\0", 1));
      mix(std::to_string(bytes.size()));
      mix(std::string_view("\0", 1));
      mix(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"generate", "train", "eval", "sweep", "export-attention"};
  return names;
}

ordered_json run_command(const std::string& command, RunConfig config) {
  apply_env_overrides(config);
  validate_config(command, config);
  const auto inputs = command_inputs(command, config);
  const std::string hash = content_hash(inputs);
  fs::create_directories(config.out);

  ordered_json summary;
  if (command == "generate") summary = do_generate(config);
  else if (command == "train") summary = do_train(config);
  else if (command == "eval") summary = do_eval(config);
  else if (command == "sweep") summary = do_sweep(config);
  else summary = do_export_attention(config);

  ordered_json run;
  run["command"] = command;
  run["config"] = config.to_json();
  run["inputs_hash"] = "fnv1a64:" + hash;
  write_text(fs::path(config.out) / "run.json", run.dump(2) + "\n");
  return summary;
}

ordered_json rerun(const fs::path& run_json, const std::optional<std::string>& out) {
  std::ifstream in(run_json);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + run_json.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, run_json.string() + ": " + e.what());
  }
  if (!j.contains("command") || !j.contains("config")) {
    throw Error(ErrorCode::ConfigError, run_json.string() + " lacks command/config");
  }
  RunConfig config = RunConfig::from_json(j.at("config"));
  if (out) config.out = *out;
  return run_command(j.at("command").get<std::string>(), config);
}

}  // namespace l2l
