#include "l2l/model.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "l2l/tensor_io.hpp"

namespace l2l {

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::FcHead: return "fc_head";
    case Mode::AqnOnly: return "aqn_only";
    case Mode::Label2Label: return "label2label";
    case Mode::MlmNoImage: return "mlm_no_image";
    case Mode::TwoStage: return "two_stage";
  }
  return "label2label";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::FcHead, Mode::AqnOnly, Mode::Label2Label, Mode::MlmNoImage, Mode::TwoStage}) {
    if (mode_name(m) == name) return m;
  }
  throw Error(ErrorCode::ConfigError, "unknown mode '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { return Error(ErrorCode::ConfigError, why); };
  if (num_attributes == 0) throw fail("num_attributes must be positive");
  if (image_size == 0 || image_size % 4 != 0) throw fail("image_size must be a positive multiple of 4");
  if (d == 0 || d % 4 != 0) throw fail("d_model must be a positive multiple of 4");
  if (heads == 0 || d % heads != 0) throw fail("d_model must be divisible by heads");
  if (ffn_hidden == 0 || conv1_channels == 0 || conv2_channels == 0 || channels == 0) {
    throw fail("layer widths must be positive");
  }
  if (mode != Mode::FcHead && aqn_layers == 0) throw fail("aqn_layers must be >= 1 outside fc_head mode");
  if (has_icmlm() && mlm_layers == 0) throw fail("mlm_layers must be >= 1");
}

Label2LabelModel Label2LabelModel::create(const ModelConfig& config) {
  config.validate();
  Label2LabelModel model;
  model.config_ = config;
  if (config.mode == Mode::FcHead) model.config_.aqn_layers = 0;
  Rng rng(config.init_seed);

  BackboneConfig bc;
  bc.image_size = config.image_size;
  bc.channels = config.channels;
  bc.conv1_channels = config.conv1_channels;
  bc.conv2_channels = config.conv2_channels;
  bc.d = config.d;
  bc.pos_embedding = config.pos_embedding;
  model.backbone_ = Backbone::create(bc, rng);

  DecoderConfig dc{config.d, config.heads, config.ffn_hidden, true};
  model.aqn_ = Aqn::create({config.num_attributes, model.config_.aqn_layers, dc}, rng);
  if (config.has_icmlm()) {
    IcmlmConfig ic;
    ic.num_attributes = config.num_attributes;
    ic.layers = config.mlm_layers;
    ic.decoder = dc;
    ic.mask_strategy = config.mask_strategy;
    ic.image_conditioned = config.mode != Mode::MlmNoImage;
    model.icmlm_ = Icmlm::create(ic, rng);
  }
  return model;
}

ForwardPass Label2LabelModel::forward(const Tensor& images, const ForwardOptions& options) const {
  ForwardPass pass;
  {
    std::optional<NoGradGuard> frozen;
    if (options.freeze_front) frozen.emplace();
    pass.features = backbone_.extract(images);
    pass.aqn = aqn_.forward(pass.features, options.trace ? &pass.aqn_trace : nullptr);
  }
  if (!icmlm_) return pass;

  const std::size_t m = config_.num_attributes;
  if (options.sentences) {
    pass.sentences = *options.sentences;
  } else {
    pass.sentences.reserve(pass.aqn.batch);
    for (std::size_t b = 0; b < pass.aqn.batch; ++b) {
      const auto s = std::span(pass.aqn.pseudo_sentence).subspan(b * m, m);
      pass.sentences.push_back(options.mask_rng ? mask_sentence(s, options.alpha, *options.mask_rng)
                                                : unmasked_sentence(s));
    }
  }
  if (pass.sentences.size() != pass.aqn.batch) throw Error(ErrorCode::ShapeMismatch, "sentence count vs batch");
  const Tensor embeds = embed_words(pass.sentences, icmlm_->vocab, config_.mask_strategy);
  pass.mlm = icmlm_->forward(embeds, pass.features, options.trace ? &pass.mlm_trace : nullptr);
  return pass;
}

std::vector<double> Label2LabelModel::predict(const Tensor& images) const {
  NoGradGuard no_grad;
  const ForwardPass pass = forward(images);
  const auto p = pass.final_probs().data();
  return {p.begin(), p.end()};
}

ParamList Label2LabelModel::front_params() const {
  ParamList out;
  backbone_.collect("backbone", out);
  aqn_.collect("aqn", out);
  return out;
}

ParamList Label2LabelModel::icmlm_params() const {
  ParamList out;
  if (icmlm_) icmlm_->collect("icmlm", out);
  return out;
}

ParamList Label2LabelModel::params() const {
  ParamList out = front_params();
  for (auto& p : icmlm_params()) out.push_back(std::move(p));
  return out;
}

namespace {

std::map<std::string, std::string> config_to_map(const ModelConfig& c) {
  return {{"mode", std::string(mode_name(c.mode))},
          {"num_attributes", std::to_string(c.num_attributes)},
          {"image_size", std::to_string(c.image_size)},
          {"channels", std::to_string(c.channels)},
          {"conv1_channels", std::to_string(c.conv1_channels)},
          {"conv2_channels", std::to_string(c.conv2_channels)},
          {"d_model", std::to_string(c.d)},
          {"heads", std::to_string(c.heads)},
          {"ffn_hidden", std::to_string(c.ffn_hidden)},
          {"aqn_layers", std::to_string(c.aqn_layers)},
          {"mlm_layers", std::to_string(c.mlm_layers)},
          {"pos_embedding", c.pos_embedding ? "true" : "false"},
          {"mask_strategy", std::string(mask_strategy_name(c.mask_strategy))},
          {"init_seed", std::to_string(c.init_seed)}};
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IncompatibleCheckpoint, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::IncompatibleCheckpoint, path.string() + ": bad line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

void Label2LabelModel::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  {
    std::ofstream cfg(dir / "model.cfg", std::ios::trunc);
    for (const auto& [k, v] : config_to_map(config_)) cfg << k << '=' << v << '\n';
    if (!cfg) throw Error(ErrorCode::IoError, "cannot write model.cfg");
  }
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  for (const auto& p : params()) {
    const std::string file = p.name + ".l2lt";
    write_tensor(dir / file, p.tensor);
    manifest << p.name << '\t' << file << '\t' << shape_to_string(p.tensor.shape()) << '\t'
             << init_scheme_name(p.scheme) << '\n';
  }
  if (!manifest) throw Error(ErrorCode::IoError, "cannot write manifest.txt");
}

Label2LabelModel Label2LabelModel::load(const std::filesystem::path& dir) {
  const auto kv = read_key_values(dir / "model.cfg");
  ModelConfig c;
  try {
    c.mode = parse_mode(kv.at("mode"));
    c.num_attributes = std::stoul(kv.at("num_attributes"));
    c.image_size = std::stoul(kv.at("image_size"));
    c.channels = std::stoul(kv.at("channels"));
    c.conv1_channels = std::stoul(kv.at("conv1_channels"));
    c.conv2_channels = std::stoul(kv.at("conv2_channels"));
    c.d = std::stoul(kv.at("d_model"));
    c.heads = std::stoul(kv.at("heads"));
    c.ffn_hidden = std::stoul(kv.at("ffn_hidden"));
    c.aqn_layers = std::stoul(kv.at("aqn_layers"));
    c.mlm_layers = std::stoul(kv.at("mlm_layers"));
    c.pos_embedding = kv.at("pos_embedding") == "true";
    c.mask_strategy = parse_mask_strategy(kv.at("mask_strategy"));
    c.init_seed = std::stoull(kv.at("init_seed"));
  } catch (const std::out_of_range& e) {
    throw Error(ErrorCode::IncompatibleCheckpoint, dir.string() + ": model.cfg missing a key");
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::IncompatibleCheckpoint, dir.string() + ": model.cfg has a malformed value");
  }
  Label2LabelModel model = create(c);

  std::map<std::string, std::string> files;
  {
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw Error(ErrorCode::IncompatibleCheckpoint, "missing manifest.txt in " + dir.string());
    std::string line;
    while (std::getline(manifest, line)) {
      if (line.empty()) continue;
      std::istringstream is(line);
      std::string name, file;
      std::getline(is, name, '\t');
      std::getline(is, file, '\t');
      files[name] = file;
    }
  }
  for (auto& p : model.params()) {
    auto it = files.find(p.name);
    if (it == files.end()) throw Error(ErrorCode::IncompatibleCheckpoint, "checkpoint lacks " + p.name);
    const Tensor stored = read_tensor(dir / it->second);
    if (stored.shape() != p.tensor.shape()) {
      throw Error(ErrorCode::IncompatibleCheckpoint, p.name + " has shape " + shape_to_string(stored.shape()) +
                                                         ", model expects " + shape_to_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(stored.data().begin(), stored.data().end(), dst.begin());
  }
  return model;
}

Tensor stack_images(const std::vector<const std::vector<double>*>& images, std::size_t size, std::size_t channels) {
  const std::size_t per = size * size * channels;
  std::vector<double> data;
  data.reserve(images.size() * per);
  for (const auto* img : images) {
    if (img->size() != per) throw Error(ErrorCode::BadImageShape, "image has " + std::to_string(img->size()) + " values");
    data.insert(data.end(), img->begin(), img->end());
  }
  return Tensor::from({images.size(), size, size, channels}, std::move(data));
}

}  // namespace l2l
