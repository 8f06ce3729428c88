#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mlpr/autodiff/parameter.hpp"
#include "mlpr/autodiff/tensor.hpp"

namespace mlpr::ad {

enum class OpKind : std::uint8_t {
  leaf,
  matmul,
  add,
  mul,
  concat,
  relu,
  sigmoid,
  softmax,
  log,
  mean,
  batchnorm,
  dropout,
  scale,
  exp,
  clamp,
  slice,
  sum_last,
};

std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);

// Every differentiable op kind (everything except leaf).
const std::vector<OpKind>& differentiable_ops();

enum class Mode { train, eval };

class Graph;

// Lightweight handle to a node of a Graph.
class Var {
 public:
  Var() = default;

  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// One recorded operation. `saved_*`, `alpha`, `beta`, and `offset` hold the
// op-specific state the backward rule needs.
struct Node {
  OpKind kind = OpKind::leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  Parameter* param = nullptr;
  Tensor saved_a;
  Tensor saved_b;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t offset = 0;
};

// Tape of operations in topological (insertion) order. A graph is built for a
// single forward pass, differentiated at most once per loss, then discarded.
class Graph {
 public:
  explicit Graph(Mode mode = Mode::train) : mode_(mode) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::train; }

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Leaf bound to a model parameter; gradients are accumulated into
  // `param.grad` by backward(). Repeated calls return the same node.
  Var parameter(Parameter& param);

  // Reverse pass from a scalar loss. Node gradients are reset first;
  // parameter gradients accumulate on top of whatever they hold.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() w.r.t. `v`; zeros if `v` was unreachable.
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Appends a fully computed node. Used by the op implementations.
  Var record(Node node);

  // Scales the gradient flowing out of every node of `kind` by 1.5 during
  // backward. Exists so the gradient-check harness can be shown to catch a
  // broken backward rule.
  void inject_backward_fault(OpKind kind) { fault_ = kind; }

 private:
  Mode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::optional<OpKind> fault_;
};

}  // namespace mlpr::ad
