#include "mlpr/autodiff/graph.hpp"

#include <array>
#include <string>

#include "backward_rules.hpp"
#include "mlpr/error.hpp"

namespace mlpr::ad {

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 17> kOpNames{{
    {OpKind::leaf, "leaf"},
    {OpKind::matmul, "matmul"},
    {OpKind::add, "add"},
    {OpKind::mul, "mul"},
    {OpKind::concat, "concat"},
    {OpKind::relu, "relu"},
    {OpKind::sigmoid, "sigmoid"},
    {OpKind::softmax, "softmax"},
    {OpKind::log, "log"},
    {OpKind::mean, "mean"},
    {OpKind::batchnorm, "batchnorm"},
    {OpKind::dropout, "dropout"},
    {OpKind::scale, "scale"},
    {OpKind::exp, "exp"},
    {OpKind::clamp, "clamp"},
    {OpKind::slice, "slice"},
    {OpKind::sum_last, "sum_last"},
}};

}  // namespace

std::string_view op_name(OpKind kind) {
  for (const auto& [k, name] : kOpNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<OpKind> op_from_name(std::string_view name) {
  for (const auto& [k, n] : kOpNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

const std::vector<OpKind>& differentiable_ops() {
  static const std::vector<OpKind> ops = [] {
    std::vector<OpKind> out;
    for (const auto& [k, name] : kOpNames) {
      if (k != OpKind::leaf) out.push_back(k);
    }
    return out;
  }();
  return ops;
}

const Tensor& Var::value() const {
  if (graph_ == nullptr) throw ContractError("value() on an unbound Var");
  return graph_->value(*this);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return record(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return record(std::move(n));
}

Var Graph::parameter(Parameter& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.value = param.value;
  n.requires_grad = param.trainable;
  n.param = &param;
  Var v = record(std::move(n));
  param_nodes_.emplace(&param, v.id());
  return v;
}

Var Graph::record(Node node) {
  for (std::size_t in : node.inputs) {
    if (in >= nodes_.size()) {
      throw ContractError("node input refers to a later node");
    }
    if (nodes_[in].requires_grad) node.requires_grad = true;
  }
  if (!node.value.all_finite()) {
    throw NumericError("op '" + std::string(op_name(node.kind)) +
                       "' produced a non-finite value (shape " +
                       shape_string(node.value.shape()) + ")");
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(Var v) const {
  if (v.graph() != this) throw ContractError("Var belongs to another graph");
  return nodes_.at(v.id()).value;
}

Tensor Graph::grad(Var v) const {
  if (v.graph() != this) throw ContractError("Var belongs to another graph");
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw ContractError("loss belongs to another graph");
  const Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!root.requires_grad) return;
  nodes_[loss.id()].grad = Tensor(root.value.shape(), 1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || n.kind == OpKind::leaf) continue;
    if (fault_ && *fault_ == n.kind) {
      Tensor skewed = n.grad;
      for (double& g : skewed.data()) g *= 1.5;
      detail::propagate(n, skewed, nodes_);
    } else {
      detail::propagate(n, n.grad, nodes_);
    }
  }

  for (auto& n : nodes_) {
    if (n.grad.empty()) continue;
    if (!n.grad.all_finite()) {
      throw NumericError("non-finite gradient at op '" +
                         std::string(op_name(n.kind)) + "'" +
                         (n.param ? " (parameter " + n.param->name + ")" : ""));
    }
    if (n.kind == OpKind::leaf && n.param != nullptr && n.param->trainable) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

}  // namespace mlpr::ad
