#include "mlpr/objective/model_grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mlpr/error.hpp"

namespace mlpr::objective {

ModelGradCheckResult check_model_gradients(model::RankingModel& model, const Tensor& inputs,
                                           const std::array<Tensor, kTaskCount>& labels,
                                           const LossConfig& loss_config,
                                           const UncertaintyWeights* uncertainty, double h,
                                           std::uint64_t dropout_seed,
                                           std::optional<ad::OpKind> corrupt) {
  if (!(h > 0.0)) throw ContractError("gradient check step must be positive");
  ad::ParameterStore& store = model.store();

  // Running statistics change on every train-mode forward but never feed the
  // train-mode output; restore them anyway so the check leaves no trace.
  std::vector<std::pair<ad::Parameter*, Tensor>> buffers;
  for (auto* p : store.all()) {
    if (!p->trainable) buffers.emplace_back(p, p->value);
  }

  auto evaluate = [&](bool differentiate) {
    Graph g(ad::Mode::train);
    if (corrupt) g.inject_backward_fault(*corrupt);
    std::mt19937_64 rng(dropout_seed);
    const auto fwd = model.forward(g, g.constant(inputs), rng);
    const auto loss = model_loss(fwd, labels, loss_config, uncertainty);
    if (differentiate) g.backward(loss.total);
    return loss.total.value().item();
  };

  store.zero_grad();
  evaluate(true);
  const auto params = store.trainable();
  std::vector<Tensor> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  ModelGradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i]->value.data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double original = values[j];
      values[j] = original + h;
      const double up = evaluate(false);
      values[j] = original - h;
      const double down = evaluate(false);
      values[j] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i][j] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_error || result.worst_parameter.empty()) {
        result.max_error = err;
        result.worst_parameter = params[i]->name;
      }
      ++result.entries_checked;
    }
  }
  for (auto& [p, saved] : buffers) p->value = saved;
  store.zero_grad();
  return result;
}

}  // namespace mlpr::objective
