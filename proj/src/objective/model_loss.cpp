#include "mlpr/objective/model_loss.hpp"

#include "mlpr/error.hpp"

namespace mlpr::objective {

ModelLoss model_loss(const model::ForwardResult& forward,
                     const std::array<Tensor, kTaskCount>& labels, const LossConfig& config,
                     const UncertaintyWeights* uncertainty, const Tensor* sample_weights) {
  ModelLoss out;
  for (std::size_t k = 0; k < kTaskCount; ++k) {
    out.per_task[k] = bce_loss(forward.predicted[k], labels[k], sample_weights);
  }
  if (config.mode == LossMode::uncertainty) {
    if (!uncertainty) throw ContractError("uncertainty loss mode needs uncertainty weights");
    const auto s = uncertainty->bind(*out.per_task[0].graph());
    out.total = combine_uncertainty(out.per_task, s);
  } else {
    out.total = combine_fixed(out.per_task, config.weights);
  }
  return out;
}

}  // namespace mlpr::objective
