#include "label2label.h"

#include <cstring>
#include <string>

#include "l2l/commands.hpp"
#include "l2l/model.hpp"
#include "l2l/tensor_io.hpp"

struct l2l_config_s {
  l2l::RunConfig config;
};

struct l2l_model_s {
  l2l::Label2LabelModel model;
};

namespace {

thread_local std::string last_error;

l2l_status status_of(l2l::ErrorCode code) {
  using l2l::ErrorCode;
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::StrategyMismatch:
    case ErrorCode::GammaOutOfRange:
    case ErrorCode::KTooLarge:
      return L2L_ERR_CONFIG;
    case ErrorCode::ManifestError:
    case ErrorCode::TensorFormatError:
    case ErrorCode::LabelDomainError:
    case ErrorCode::IncompatibleCheckpoint:
    case ErrorCode::SampleNotFound:
    case ErrorCode::BadImageShape:
    case ErrorCode::DegenerateAttribute:
      return L2L_ERR_DATA;
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonScalarLoss:
    case ErrorCode::DomainError:
    case ErrorCode::MissingGradient:
      return L2L_ERR_NUMERIC;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::AxisOutOfRange:
    case ErrorCode::ZeroLengthSequence:
      return L2L_ERR_SHAPE;
    case ErrorCode::IoError:
      return L2L_ERR_IO;
  }
  return L2L_ERR_INTERNAL;
}

template <class F>
int guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return L2L_OK;
  } catch (const l2l::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return L2L_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return L2L_ERR_INTERNAL;
  }
}

int bad_argument(const char* what) {
  last_error = std::string("invalid argument: ") + what;
  return L2L_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* l2l_last_error(void) { return last_error.c_str(); }

const char* l2l_version(void) { return "1.0.0"; }

int l2l_exit_code(int status) {
  switch (status) {
    case L2L_OK: return 0;
    case L2L_ERR_ARGUMENT:
    case L2L_ERR_CONFIG:
    case L2L_ERR_DATA:
    case L2L_ERR_IO:
      return 2;
    case L2L_ERR_NUMERIC: return 3;
    default: return 1;
  }
}

int l2l_config_create(l2l_config* out) {
  if (!out) return bad_argument("out");
  return guarded([&] { *out = new l2l_config_s{}; });
}

void l2l_config_free(l2l_config config) { delete config; }

int l2l_config_set(l2l_config config, const char* key, const char* value) {
  if (!config || !key || !value) return bad_argument("config, key and value are required");
  return guarded([&] { config->config.set(key, value); });
}

int l2l_config_get(l2l_config config, const char* key, char* buf, size_t buf_len, size_t* needed) {
  if (!config || !key) return bad_argument("config and key are required");
  std::string text;
  const int st = guarded([&] {
    const auto j = config->config.to_json();
    if (!j.contains(key)) throw l2l::Error(l2l::ErrorCode::ConfigError, std::string("unknown config key '") + key + "'");
    text = j.at(key).is_string() ? j.at(key).get<std::string>() : j.at(key).dump();
  });
  if (st != L2L_OK) return st;
  if (needed) *needed = text.size() + 1;
  if (!buf || buf_len < text.size() + 1) return bad_argument("buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return L2L_OK;
}

int l2l_config_load_file(l2l_config config, const char* path) {
  if (!config || !path) return bad_argument("config and path are required");
  return guarded([&] { l2l::load_config_file(path, config->config); });
}

int l2l_run_command(const char* command, l2l_config config) {
  if (!command || !config) return bad_argument("command and config are required");
  return guarded([&] { l2l::run_command(command, config->config); });
}

int l2l_rerun(const char* run_json_path, const char* out) {
  if (!run_json_path) return bad_argument("run_json_path");
  return guarded([&] {
    l2l::rerun(run_json_path, out ? std::optional<std::string>(out) : std::nullopt);
  });
}

int l2l_model_load(const char* checkpoint_dir, l2l_model* out) {
  if (!checkpoint_dir || !out) return bad_argument("checkpoint_dir and out are required");
  return guarded([&] { *out = new l2l_model_s{l2l::Label2LabelModel::load(checkpoint_dir)}; });
}

void l2l_model_free(l2l_model model) { delete model; }

int l2l_model_num_attributes(l2l_model model, size_t* out) {
  if (!model || !out) return bad_argument("model and out are required");
  *out = model->model.config().num_attributes;
  return L2L_OK;
}

int l2l_model_image_size(l2l_model model, size_t* size, size_t* channels) {
  if (!model || !size || !channels) return bad_argument("model, size and channels are required");
  *size = model->model.config().image_size;
  *channels = model->model.config().channels;
  return L2L_OK;
}

int l2l_model_predict(l2l_model model, const double* images, size_t batch, double* probs, size_t probs_len) {
  if (!model || !images || !probs || batch == 0) return bad_argument("model, images and probs are required");
  const auto& cfg = model->model.config();
  if (probs_len < batch * cfg.num_attributes) return bad_argument("probs buffer too small");
  return guarded([&] {
    const std::size_t per = cfg.image_size * cfg.image_size * cfg.channels;
    const l2l::Tensor x = l2l::Tensor::from({batch, cfg.image_size, cfg.image_size, cfg.channels},
                                            std::vector<double>(images, images + batch * per));
    const auto p = model->model.predict(x);
    std::memcpy(probs, p.data(), p.size() * sizeof(double));
  });
}

int l2l_tensor_write(const char* path, const size_t* dims, size_t rank, const double* data) {
  if (!path || (rank > 0 && !dims)) return bad_argument("path and dims are required");
  return guarded([&] {
    l2l::Shape shape(dims, dims + rank);
    const std::size_t n = l2l::shape_numel(shape);
    if (n > 0 && !data) throw l2l::Error(l2l::ErrorCode::ShapeMismatch, "null data for non-empty tensor");
    l2l::write_tensor(path, l2l::Tensor::from(shape, std::vector<double>(data, data + n)));
  });
}

int l2l_tensor_read(const char* path, size_t* dims, size_t max_rank, size_t* rank, double* data, size_t data_len,
                    size_t* numel) {
  if (!path || !rank || !numel) return bad_argument("path, rank and numel are required");
  l2l::Tensor t;
  const int st = guarded([&] { t = l2l::read_tensor(path); });
  if (st != L2L_OK) return st;
  *rank = t.rank();
  *numel = t.numel();
  if (!data) return L2L_OK;
  if (!dims || max_rank < t.rank() || data_len < t.numel()) return bad_argument("dims or data buffer too small");
  for (std::size_t i = 0; i < t.rank(); ++i) dims[i] = t.dim(i);
  std::memcpy(data, t.data().data(), t.numel() * sizeof(double));
  return L2L_OK;
}

}  // extern "C"
