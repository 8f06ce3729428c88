#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "mlpr/autodiff/graph.hpp"

namespace mlpr::ad {

// Elementwise ops (add, mul) broadcast over the matrix view: each input
// dimension must equal the output dimension or be 1.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var concat(std::span<const Var> parts);
Var relu(Var x);
Var sigmoid(Var x);
Var softmax(Var x);
Var log(Var x);
Var exp(Var x);
Var mean(Var x);
Var scale(Var x, double factor);
Var clamp(Var x, double lo, double hi);
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var sum_last(Var x);

struct RunningStats {
  Tensor* mean = nullptr;
  Tensor* var = nullptr;
  double momentum = 0.9;
  double eps = 1e-5;
};

// Train mode normalizes with the batch's population moments and folds them
// into `stats` (running = momentum * running + (1 - momentum) * batch).
// Eval mode normalizes with the running moments.
Var batch_norm(Var x, Var gamma, Var beta, RunningStats stats);

// Inverted dropout: survivors are scaled by 1 / (1 - ratio) in train mode;
// eval mode is the identity.
Var dropout(Var x, double ratio, std::mt19937_64& rng);

// Convenience: a - b.
Var sub(Var a, Var b);

}  // namespace mlpr::ad
