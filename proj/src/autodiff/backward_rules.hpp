#pragma once

#include <vector>

#include "mlpr/autodiff/graph.hpp"

namespace mlpr::ad::detail {

// Pushes `grad` (the gradient w.r.t. node.value) into the grad buffers of the
// node's inputs.
void propagate(const Node& node, const Tensor& grad, std::vector<Node>& nodes);

}  // namespace mlpr::ad::detail
