#include "mlpr/objective/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlpr/autodiff/ops.hpp"
#include "mlpr/error.hpp"

namespace mlpr::objective {

namespace {

void check_label(double y, std::size_t i) {
  if (y != 0.0 && y != 1.0) {
    throw ContractError("label " + std::to_string(i) + " is " + std::to_string(y) +
                        "; labels must be 0 or 1");
  }
}

void check_task_count(std::size_t got, const char* what) {
  if (got != kTaskCount) {
    throw DimensionError(std::string(what) + " expects " + std::to_string(kTaskCount) +
                         " entries, got " + std::to_string(got));
  }
}

}  // namespace

std::string_view loss_mode_name(LossMode mode) {
  return mode == LossMode::fixed ? "fixed" : "uncertainty";
}

LossMode loss_mode_from_name(std::string_view name) {
  if (name == "fixed") return LossMode::fixed;
  if (name == "uncertainty") return LossMode::uncertainty;
  throw ContractError("unknown loss mode '" + std::string(name) + "'");
}

void LossConfig::validate() const {
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ContractError("fixed loss weights must be finite and nonnegative");
    }
  }
}

double bce_loss(std::span<const double> predicted, std::span<const double> labels) {
  if (predicted.size() != labels.size() || predicted.empty()) {
    throw DimensionError("bce_loss: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    check_label(labels[i], i);
    const double p = std::clamp(predicted[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += labels[i] == 1.0 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(predicted.size());
}

Var bce_loss(Var predicted, const Tensor& labels, const Tensor* sample_weights) {
  Graph& g = *predicted.graph();
  if (predicted.value().size() != labels.size() || labels.empty()) {
    throw DimensionError("bce_loss: prediction " + ad::shape_string(predicted.shape()) +
                         " vs labels " + ad::shape_string(labels.shape()));
  }
  Tensor pos(predicted.shape());
  Tensor neg(predicted.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i], i);
    pos[i] = labels[i];
    neg[i] = 1.0 - labels[i];
  }
  if (sample_weights) {
    if (sample_weights->size() != labels.size()) {
      throw DimensionError("bce_loss: sample weights do not match labels");
    }
    double sum = 0.0;
    for (double w : sample_weights->data()) {
      if (!(w > 0.0)) throw ContractError("bce_loss: sample weights must be positive");
      sum += w;
    }
    // Rescale so the plain mean below becomes the weighted mean.
    const double factor = static_cast<double>(labels.size()) / sum;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      pos[i] *= (*sample_weights)[i] * factor;
      neg[i] *= (*sample_weights)[i] * factor;
    }
  }
  Var p = ad::clamp(predicted, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Var one_minus_p = ad::add(ad::scale(p, -1.0), g.constant(Tensor(predicted.shape(), 1.0)));
  Var ll = ad::add(ad::mul(g.constant(std::move(pos)), ad::log(p)),
                   ad::mul(g.constant(std::move(neg)), ad::log(one_minus_p)));
  return ad::scale(ad::mean(ll), -1.0);
}

double combine_fixed(std::span<const double> losses, std::span<const double> weights) {
  check_task_count(losses.size(), "combine_fixed losses");
  check_task_count(weights.size(), "combine_fixed weights");
  double total = 0.0;
  for (std::size_t k = 0; k < losses.size(); ++k) total += weights[k] * losses[k];
  return total;
}

Var combine_fixed(std::span<const Var> losses, std::span<const double> weights) {
  check_task_count(losses.size(), "combine_fixed losses");
  check_task_count(weights.size(), "combine_fixed weights");
  Var total = ad::scale(losses[0], weights[0]);
  for (std::size_t k = 1; k < losses.size(); ++k) {
    total = ad::add(total, ad::scale(losses[k], weights[k]));
  }
  return total;
}

double combine_uncertainty(std::span<const double> losses, std::span<const double> log_variance) {
  check_task_count(losses.size(), "combine_uncertainty losses");
  check_task_count(log_variance.size(), "combine_uncertainty log variances");
  double total = 0.0;
  for (std::size_t k = 0; k < losses.size(); ++k) {
    total += 0.5 * (std::exp(-log_variance[k]) * losses[k]) + 0.5 * log_variance[k];
  }
  return total;
}

Var combine_uncertainty(std::span<const Var> losses, std::span<const Var> log_variance) {
  check_task_count(losses.size(), "combine_uncertainty losses");
  check_task_count(log_variance.size(), "combine_uncertainty log variances");
  Var total;
  for (std::size_t k = 0; k < losses.size(); ++k) {
    Var precision = ad::exp(ad::scale(log_variance[k], -1.0));
    Var term = ad::add(ad::scale(ad::mul(precision, losses[k]), 0.5),
                       ad::scale(log_variance[k], 0.5));
    total = k == 0 ? term : ad::add(total, term);
  }
  return total;
}

UncertaintyWeights::UncertaintyWeights(ad::ParameterStore& store) {
  for (std::size_t k = 0; k < kTaskCount; ++k) {
    params_[k] = &store.create("uncertainty/s" + std::to_string(k), Tensor::scalar(0.0));
  }
}

std::vector<Var> UncertaintyWeights::bind(Graph& g) const {
  std::vector<Var> out;
  for (auto* p : params_) out.push_back(g.parameter(*p));
  return out;
}

std::array<double, kTaskCount> UncertaintyWeights::values() const {
  std::array<double, kTaskCount> out{};
  for (std::size_t k = 0; k < kTaskCount; ++k) out[k] = params_[k]->value.item();
  return out;
}

}  // namespace mlpr::objective
