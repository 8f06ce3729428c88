#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mlpr/autodiff/graph.hpp"
#include "mlpr/autodiff/parameter.hpp"
#include "mlpr/model/config.hpp"

namespace mlpr::objective {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using model::kTaskCount;

enum class LossMode { fixed, uncertainty };

std::string_view loss_mode_name(LossMode mode);
LossMode loss_mode_from_name(std::string_view name);

struct LossConfig {
  LossMode mode = LossMode::uncertainty;
  std::array<double, kTaskCount> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  bool impression_weighting = false;

  void validate() const;
};

inline constexpr double kProbabilityClamp = 1e-12;

// Mean binary cross-entropy with predictions clamped to [1e-12, 1 - 1e-12].
// Labels must be exactly 0 or 1.
double bce_loss(std::span<const double> predicted, std::span<const double> labels);

// Graph form over a [B, 1] prediction. `labels` is [B, 1]. With
// `sample_weights` (same shape, positive) the mean becomes a weighted mean.
Var bce_loss(Var predicted, const Tensor& labels, const Tensor* sample_weights = nullptr);

double combine_fixed(std::span<const double> losses, std::span<const double> weights);
Var combine_fixed(std::span<const Var> losses, std::span<const double> weights);

// sum_k exp(-s_k) / 2 * L_k + s_k / 2, with s_k = log sigma_k^2.
double combine_uncertainty(std::span<const double> losses, std::span<const double> log_variance);
Var combine_uncertainty(std::span<const Var> losses, std::span<const Var> log_variance);

// Trainable per-task log variances, registered as "uncertainty/s<k>" and
// initialized to 0.
class UncertaintyWeights {
 public:
  explicit UncertaintyWeights(ad::ParameterStore& store);

  std::vector<Var> bind(Graph& g) const;
  std::array<double, kTaskCount> values() const;

 private:
  std::array<ad::Parameter*, kTaskCount> params_{};
};

}  // namespace mlpr::objective
