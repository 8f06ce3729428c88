#include "mlpr/model/extraction.hpp"

#include "mlpr/error.hpp"

namespace mlpr::model {

SharedPoolStage::SharedPoolStage(ParameterStore& store, const std::string& name,
                                 std::size_t in_dim, std::size_t task_count, std::size_t experts,
                                 const std::vector<std::size_t>& expert_hidden,
                                 const FeedForward::Options& options,
                                 std::mt19937_64& init_rng) {
  if (task_count == 0 || experts == 0) {
    throw ContractError("stage '" + name + "' needs at least one task and one expert");
  }
  for (std::size_t e = 0; e < experts; ++e) {
    experts_.emplace_back(store, name + "/expert" + std::to_string(e), in_dim, expert_hidden,
                          options, init_rng);
  }
  for (std::size_t k = 0; k < task_count; ++k) {
    gates_.emplace_back(store, name + "/gate" + std::to_string(k), in_dim, experts, init_rng);
  }
}

StageOutput SharedPoolStage::forward(Graph& g, Var x, std::mt19937_64& dropout_rng) const {
  std::vector<Var> outputs;
  outputs.reserve(experts_.size());
  for (const auto& expert : experts_) outputs.push_back(expert.forward(g, x, dropout_rng));

  StageOutput out;
  for (const auto& gate : gates_) {
    Var w = gate.forward(g, x);
    out.per_task.push_back(mix_experts(w, outputs));
    out.gate_weights.push_back(w);
  }
  return out;
}

SpecificSharedStage::SpecificSharedStage(ParameterStore& store, const std::string& name,
                                         std::size_t in_dim, std::size_t task_count,
                                         std::size_t shared, std::size_t specific,
                                         const std::vector<std::size_t>& expert_hidden,
                                         const FeedForward::Options& options,
                                         std::mt19937_64& init_rng)
    : name_(name) {
  if (task_count == 0 || shared == 0 || specific == 0) {
    throw ContractError("stage '" + name + "' needs at least one task, shared and specific expert");
  }
  for (std::size_t e = 0; e < shared; ++e) {
    shared_.emplace_back(store, shared_prefix() + std::to_string(e), in_dim, expert_hidden,
                         options, init_rng);
  }
  specific_.resize(task_count);
  for (std::size_t k = 0; k < task_count; ++k) {
    for (std::size_t e = 0; e < specific; ++e) {
      specific_[k].emplace_back(store, specific_prefix(k) + std::to_string(e), in_dim,
                                expert_hidden, options, init_rng);
    }
    gates_.emplace_back(store, name + "/gate" + std::to_string(k), in_dim, specific + shared,
                        init_rng);
  }
}

std::string SpecificSharedStage::specific_prefix(std::size_t task) const {
  return name_ + "/task" + std::to_string(task) + "/specific";
}

std::string SpecificSharedStage::shared_prefix() const { return name_ + "/shared"; }

StageOutput SpecificSharedStage::forward(Graph& g, std::span<const Var> inputs,
                                         std::mt19937_64& dropout_rng) const {
  if (inputs.size() != gates_.size()) {
    throw DimensionError("stage '" + name_ + "' expects " + std::to_string(gates_.size()) +
                         " task inputs, got " + std::to_string(inputs.size()));
  }
  StageOutput out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<Var> pool;
    for (const auto& expert : specific_[k]) pool.push_back(expert.forward(g, inputs[k], dropout_rng));
    for (const auto& expert : shared_) pool.push_back(expert.forward(g, inputs[k], dropout_rng));
    Var w = gates_[k].forward(g, inputs[k]);
    out.per_task.push_back(mix_experts(w, pool));
    out.gate_weights.push_back(w);
  }
  return out;
}

}  // namespace mlpr::model
