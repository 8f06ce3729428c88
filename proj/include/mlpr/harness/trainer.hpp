#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "mlpr/autodiff/checkpoint.hpp"
#include "mlpr/data/record.hpp"
#include "mlpr/features/pipeline.hpp"
#include "mlpr/harness/feature_cache.hpp"
#include "mlpr/harness/run_config.hpp"
#include "mlpr/model/mlpr_model.hpp"
#include "mlpr/objective/loss.hpp"

namespace mlpr::harness {

using Records = std::vector<data::EngagementRecord>;
using TaskScores = std::array<std::vector<double>, model::kTaskCount>;

// A model with everything needed to score new records: the resolved run
// config (encoder seed after any refresh), the network, its loss weights and
// the training-split normalization.
struct TrainedModel {
  RunConfig config;
  std::unique_ptr<model::RankingModel> model;
  std::unique_ptr<objective::UncertaintyWeights> uncertainty;  // uncertainty mode only
  features::NormalizationStats stats;
};

// Fresh, untrained model for `config`.
TrainedModel make_model(const RunConfig& config, features::NormalizationStats stats);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_loss = 0.0;  // mean over the epoch's batches
  double val_loss = 0.0;    // eval mode, whole validation split
  std::array<double, model::kTaskCount> val_task_loss{};
  std::array<double, model::kTaskCount> log_variance{};
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

// Mini-batch Adam on `train`, early-stopping on the validation total loss
// with the configured patience; the best epoch's weights are restored at the
// end. If a loss or gradient turns non-finite, the last good weights are
// saved to `last_good` (when given) and NumericError is rethrown.
TrainReport train(TrainedModel& trained, const FeatureCache& cache, const Records& train,
                  const Records& validation,
                  const std::optional<std::filesystem::path>& last_good = std::nullopt);

struct OverfitReport {
  std::size_t steps = 0;
  double final_train_loss = 0.0;  // train mode, last step
  double final_eval_loss = 0.0;   // eval mode, same samples
};

// Full-batch training on the first `overfit_samples` records for exactly
// `overfit_steps` steps.
OverfitReport overfit(TrainedModel& trained, const FeatureCache& cache, const Records& train);

// Total and per-task loss in eval mode over `records`.
struct EvalLoss {
  double total = 0.0;
  std::array<double, model::kTaskCount> per_task{};
};
EvalLoss evaluate_loss(const TrainedModel& trained, const FeatureCache& cache, const Records& records);

// Predicted (transferred) probabilities per task, eval mode.
TaskScores predict(const TrainedModel& trained, const FeatureCache& cache, const Records& records);

// Picks the hash-encoder seed whose features let a small logistic probe
// separate clicks best on a validation sample. Stand-in for encoder
// fine-tuning; it does not adapt the encoder itself.
std::uint64_t refresh_encoder_seed(const RunConfig& config, const Records& train,
                                   const Records& validation);

// run directory layout: config.json (resolved) and model.ckpt (parameters,
// buffers, and the z-score statistics as "zscore/mean" and "zscore/std").
std::vector<ad::NamedTensor> checkpoint_tensors(const TrainedModel& trained);
void save_run(const TrainedModel& trained, const std::filesystem::path& dir);
TrainedModel load_run(const std::filesystem::path& dir);

}  // namespace mlpr::harness
