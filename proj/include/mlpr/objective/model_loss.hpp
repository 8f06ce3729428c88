#pragma once

#include <array>

#include "mlpr/model/mlpr_model.hpp"
#include "mlpr/objective/loss.hpp"

namespace mlpr::objective {

struct ModelLoss {
  std::array<Var, kTaskCount> per_task;
  Var total;
};

// Per-task BCE on the model's predicted (transferred, when enabled) outputs
// against entire-space labels, combined per `config.mode`. `uncertainty` is
// required in uncertainty mode and ignored otherwise.
ModelLoss model_loss(const model::ForwardResult& forward,
                     const std::array<Tensor, kTaskCount>& labels, const LossConfig& config,
                     const UncertaintyWeights* uncertainty, const Tensor* sample_weights = nullptr);

}  // namespace mlpr::objective
