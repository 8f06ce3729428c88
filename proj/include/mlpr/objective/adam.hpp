#pragma once

#include <cstdint>
#include <vector>

#include "mlpr/autodiff/parameter.hpp"
#include "mlpr/autodiff/tensor.hpp"

namespace mlpr::objective {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected adaptive-moment update over a fixed parameter list. Moments
// are allocated lazily, shaped like each parameter.
class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, AdamOptions options);

  // Applies one update from the parameters' current gradients. A non-finite
  // gradient throws NumericError naming the parameter, before anything is
  // modified.
  void step();

  std::uint64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<ad::Parameter*> params_;
  AdamOptions options_;
  std::vector<ad::Tensor> m_;
  std::vector<ad::Tensor> v_;
  std::uint64_t step_ = 0;
};

}  // namespace mlpr::objective
