#include "l2l/trainer.hpp"

#include <cmath>

namespace l2l {

namespace {

constexpr std::uint64_t kMaskStream = 0x3A5C0000ULL;

struct Batch {
  Tensor images;
  std::vector<std::uint8_t> labels;
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<const std::vector<double>*> imgs;
  Batch b;
  for (std::size_t i : indices) {
    imgs.push_back(&data.samples[i].image);
    b.labels.insert(b.labels.end(), data.samples[i].labels.begin(), data.samples[i].labels.end());
  }
  b.images = stack_images(imgs, data.image_size, data.channels);
  return b;
}

void clip_gradients(std::vector<Tensor>& params, double max_norm) {
  double total = 0.0;
  for (const auto& p : params)
    if (p.has_grad())
      for (double g : p.grad()) total += g * g;
  const double norm = std::sqrt(total);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (auto& p : params)
    if (p.has_grad())
      for (double& g : p.mutable_grad()) g *= scale;
}

}  // namespace

std::string_view scheduler_name(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::None: return "none";
    case SchedulerKind::Cosine: return "cosine";
    case SchedulerKind::Plateau: return "plateau";
  }
  return "none";
}

SchedulerKind parse_scheduler(std::string_view name) {
  if (name == "none") return SchedulerKind::None;
  if (name == "cosine") return SchedulerKind::Cosine;
  if (name == "plateau") return SchedulerKind::Plateau;
  throw Error(ErrorCode::ConfigError, "unknown scheduler '" + std::string(name) + "'");
}

nlohmann::ordered_json epoch_log_json(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["L_aqn"] = log.loss_aqn;
  j["L_mlm"] = log.loss_mlm;
  j["L_total"] = log.loss_total;
  j["lr"] = log.learning_rate;
  j["val"] = report_to_json(log.val);
  return j;
}

SplitPredictions predict_split(const Label2LabelModel& model, const Dataset& data,
                               const std::vector<std::size_t>& indices, std::size_t batch_size) {
  const std::size_t m = data.num_attributes();
  if (model.config().num_attributes != m) {
    throw Error(ErrorCode::IncompatibleCheckpoint, "model predicts " + std::to_string(model.config().num_attributes) +
                                                       " attributes, dataset has " + std::to_string(m));
  }
  SplitPredictions out;
  std::vector<std::uint8_t> labels;
  NoGradGuard no_grad;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = std::span(indices).subspan(start, std::min(batch_size, indices.size() - start));
    const Batch b = make_batch(data, chunk);
    const ForwardPass pass = model.forward(b.images);
    const auto p = pass.final_probs().data();
    out.probs.insert(out.probs.end(), p.begin(), p.end());
    const auto l = pass.aqn.probs.data();
    out.aqn_probs.insert(out.aqn_probs.end(), l.begin(), l.end());
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  }
  out.labels = BinaryMatrix(indices.size(), m, std::move(labels));
  out.preds = BinaryMatrix(indices.size(), m, readout(out.probs));
  return out;
}

std::vector<double> positive_ratios(const Dataset& data, const std::vector<std::size_t>& indices) {
  std::vector<double> gamma(data.num_attributes(), 0.0);
  if (indices.empty()) return gamma;
  for (std::size_t i : indices)
    for (std::size_t j = 0; j < gamma.size(); ++j) gamma[j] += data.samples[i].labels[j];
  for (double& g : gamma) g /= static_cast<double>(indices.size());
  return gamma;
}

std::vector<EpochLog> train_model(Label2LabelModel& model, const Dataset& data, const TrainOptions& options,
                                  const EpochCallback& on_epoch) {
  if (options.batch_size == 0 || options.epochs == 0) throw Error(ErrorCode::ConfigError, "epochs and batch_size must be positive");
  if (!(options.alpha >= 0.0 && options.alpha <= 1.0)) throw Error(ErrorCode::ConfigError, "alpha must lie in [0, 1]");
  if (!(options.lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "lambda must be non-negative");
  const std::size_t m = model.config().num_attributes;
  if (m != data.num_attributes() || model.config().image_size != data.image_size) {
    throw Error(ErrorCode::IncompatibleCheckpoint, "model and dataset disagree on attributes or image size");
  }
  const auto& train_idx = data.split("train");
  const auto& val_idx = data.split("val");
  if (train_idx.empty()) throw Error(ErrorCode::ManifestError, "empty train split");

  const WeightScheme scheme = options.weighting == WeightKind::Exponential
                                  ? WeightScheme::exponential(positive_ratios(data, train_idx))
                                  : WeightScheme::uniform();
  const Mode mode = model.config().mode;
  const bool two_stage = mode == Mode::TwoStage;
  const std::size_t first_stage_epochs = two_stage ? std::max<std::size_t>(1, options.epochs / 2) : 0;

  auto make_optimizer = [&](bool second_stage) {
    ParamList params;
    if (mode == Mode::FcHead || mode == Mode::AqnOnly || (two_stage && !second_stage)) {
      params = model.front_params();
    } else if (two_stage) {
      params = model.icmlm_params();
    } else {
      params = model.params();
    }
    return std::make_pair(Sgd(tensors_of(params), options.sgd), tensors_of(params));
  };
  auto [optimizer, active] = make_optimizer(false);
  PlateauScheduler plateau(options.sgd.learning_rate, options.patience);

  std::vector<EpochLog> logs;
  std::optional<double> best;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const bool second_stage = two_stage && epoch >= first_stage_epochs;
    if (two_stage && epoch == first_stage_epochs) std::tie(optimizer, active) = make_optimizer(true);

    double lr = options.sgd.learning_rate;
    if (options.scheduler == SchedulerKind::Cosine) {
      lr = cosine_lr(options.sgd.learning_rate, static_cast<double>(epoch), static_cast<double>(options.epochs));
    } else if (options.scheduler == SchedulerKind::Plateau) {
      lr = plateau.learning_rate();
    }
    optimizer.set_learning_rate(lr);

    Rng mask_rng = Rng::derive(options.seed, kMaskStream + epoch);
    const auto order = epoch_order(train_idx, options.seed, epoch);
    double sum_aqn = 0.0, sum_mlm = 0.0, sum_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const auto chunk = std::span(order).subspan(start, std::min(options.batch_size, order.size() - start));
      const Batch b = make_batch(data, chunk);
      ForwardOptions fo;
      fo.alpha = options.alpha;
      fo.mask_rng = &mask_rng;
      fo.freeze_front = second_stage;
      const ForwardPass pass = model.forward(b.images, fo);

      const double nb = static_cast<double>(chunk.size());
      const auto w = scheme.weights(b.labels, m);
      const Tensor l_aqn = div(bce_loss(pass.aqn.probs, b.labels, w), nb);
      Tensor l_mlm;
      Tensor loss;
      if (!pass.mlm) {
        loss = l_aqn;
      } else {
        l_mlm = div(bce_loss(pass.mlm->probs, b.labels, w), nb);
        if (two_stage) {
          loss = second_stage ? l_mlm : l_aqn;
        } else {
          loss = add(l_aqn, mul(l_mlm, options.lambda));
        }
      }
      check_finite(loss, "training loss at epoch " + std::to_string(epoch + 1));
      backward(loss);
      if (options.grad_clip > 0.0) clip_gradients(active, options.grad_clip);
      optimizer.step();

      sum_aqn += l_aqn.item();
      sum_mlm += l_mlm.defined() ? l_mlm.item() : 0.0;
      sum_total += loss.item();
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch + 1;
    log.loss_aqn = sum_aqn / static_cast<double>(batches);
    log.loss_mlm = sum_mlm / static_cast<double>(batches);
    log.loss_total = sum_total / static_cast<double>(batches);
    log.learning_rate = lr;
    const auto& eval_idx = val_idx.empty() ? train_idx : val_idx;
    const SplitPredictions sp = predict_split(model, data, eval_idx, std::max<std::size_t>(options.batch_size, 64));
    log.val = evaluate(sp.preds, sp.labels);
    if (options.scheduler == SchedulerKind::Plateau) plateau.step(log.val.mean_error);

    // In two-stage mode only the second stage's head is eligible.
    const bool eligible = !two_stage || second_stage;
    const bool improved = eligible && (!best || log.val.mean_error < *best);
    if (improved) best = log.val.mean_error;
    logs.push_back(log);
    if (on_epoch) on_epoch(log, improved);
  }
  return logs;
}

}  // namespace l2l
