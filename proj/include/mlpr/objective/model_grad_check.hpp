#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "mlpr/model/mlpr_model.hpp"
#include "mlpr/objective/model_loss.hpp"

namespace mlpr::objective {

struct ModelGradCheckResult {
  double max_error = 0.0;       // max |analytic - numeric| / max(1, |numeric|)
  std::string worst_parameter;  // parameter holding the worst entry
  std::size_t entries_checked = 0;
};

// Central differences of the full training loss with respect to every
// trainable entry of the model's store, which also holds the uncertainty
// weights when they were registered there. Dropout masks are reseeded
// identically for every evaluation, so the loss is a deterministic function
// of the parameters.
ModelGradCheckResult check_model_gradients(model::RankingModel& model, const Tensor& inputs,
                                           const std::array<Tensor, kTaskCount>& labels,
                                           const LossConfig& loss_config,
                                           const UncertaintyWeights* uncertainty, double h,
                                           std::uint64_t dropout_seed = 3,
                                           std::optional<ad::OpKind> corrupt = std::nullopt);

}  // namespace mlpr::objective
