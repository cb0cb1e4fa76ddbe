#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "l2l/dataset.hpp"
#include "l2l/metrics.hpp"
#include "l2l/model.hpp"
#include "l2l/objectives.hpp"

namespace l2l {

enum class SchedulerKind { None, Cosine, Plateau };

std::string_view scheduler_name(SchedulerKind kind);
SchedulerKind parse_scheduler(std::string_view name);

struct TrainOptions {
  double alpha = 0.1;
  double lambda = 1.0;
  WeightKind weighting = WeightKind::Uniform;
  SgdOptions sgd;
  SchedulerKind scheduler = SchedulerKind::Cosine;
  std::size_t patience = 4;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  // Rescales the global gradient norm to at most this value; 0 disables.
  double grad_clip = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss_aqn = 0.0;
  double loss_mlm = 0.0;
  double loss_total = 0.0;
  double learning_rate = 0.0;
  MetricReport val;
};

nlohmann::ordered_json epoch_log_json(const EpochLog& log);

struct SplitPredictions {
  BinaryMatrix labels;
  BinaryMatrix preds;             // final head, thresholded at 0.5
  std::vector<double> probs;      // final head
  std::vector<double> aqn_probs;  // l, identical to probs without IC-MLM
};

SplitPredictions predict_split(const Label2LabelModel& model, const Dataset& data,
                               const std::vector<std::size_t>& indices, std::size_t batch_size);

// Positive ratio γ_j of each attribute over the given samples.
std::vector<double> positive_ratios(const Dataset& data, const std::vector<std::size_t>& indices);

// Called after every epoch; `improved` marks a new best validation error.
using EpochCallback = std::function<void(const EpochLog&, bool improved)>;

// Minimizes L_aqn (AQN/FC-head modes) or L_aqn + λ·L_mlm over the "train"
// split and scores the "val" split after each epoch. Two-stage mode spends the
// first half of the epochs on L_aqn, then trains the IC-MLM alone on frozen
// backbone and AQN. NonFiniteLoss aborts.
std::vector<EpochLog> train_model(Label2LabelModel& model, const Dataset& data, const TrainOptions& options,
                                  const EpochCallback& on_epoch = {});

}  // namespace l2l
