#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "mlpr/autodiff/graph.hpp"
#include "mlpr/autodiff/tensor.hpp"

namespace mlpr::ad {

struct GradCheckOptions {
  // Corrupts the backward rule of this op kind (harness sensitivity checks).
  std::optional<OpKind> corrupt_backward;
  // Seed for the fixed random projection that turns the op output into a
  // scalar, and for dropout masks (identical on every evaluation).
  std::uint64_t seed = 17;
};

// Central-difference gradient check of a single op. The op's output is
// reduced to a scalar as mean(out * R) with a fixed random R, so every output
// entry contributes. Returns
//   max_i |analytic_i - numeric_i| / max(1, |numeric_i|)
// over every entry of every input.
double grad_check(OpKind kind, const std::vector<Tensor>& sample_point, double h,
                  const GradCheckOptions& options = {});

// A random, well-conditioned input set for `kind` (positive inputs for log,
// entries away from the relu kink and the clamp bounds, and so on).
std::vector<Tensor> random_sample_point(OpKind kind, std::mt19937_64& rng);

// Generic central-difference check of a scalar function of a set of leaf
// tensors. `build` must construct the graph from the supplied leaves and
// return the scalar loss; it is called once for the analytic pass and twice
// per perturbed entry.
using LossBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;
double grad_check_function(const LossBuilder& build, const std::vector<Tensor>& point,
                           double h, std::optional<OpKind> corrupt_backward = std::nullopt);

}  // namespace mlpr::ad
