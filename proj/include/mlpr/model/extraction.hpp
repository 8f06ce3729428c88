#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mlpr/model/layers.hpp"

namespace mlpr::model {

struct StageOutput {
  std::vector<Var> per_task;      // one [B, expert_dim] output per task
  std::vector<Var> gate_weights;  // one [B, selectable experts] softmax per task
};

// Shared pool of experts, each evaluated once per batch; every task mixes the
// pool with its own gate on the stage input.
class SharedPoolStage {
 public:
  SharedPoolStage(ParameterStore& store, const std::string& name, std::size_t in_dim,
                  std::size_t task_count, std::size_t experts,
                  const std::vector<std::size_t>& expert_hidden,
                  const FeedForward::Options& options, std::mt19937_64& init_rng);

  StageOutput forward(Graph& g, Var x, std::mt19937_64& dropout_rng) const;

  std::size_t out_dim() const { return experts_.front().out_dim(); }
  std::size_t task_count() const { return gates_.size(); }
  const std::vector<FeedForward>& experts() const { return experts_; }
  const std::vector<Gate>& gates() const { return gates_; }

 private:
  std::vector<FeedForward> experts_;
  std::vector<Gate> gates_;
};

// Per-task specific experts plus a shared pool. Task k's selectable experts
// are [specific_0 .. specific_{n-1}, shared_0 .. shared_{m-1}], all applied to
// task k's own input, and its gate also reads that input.
class SpecificSharedStage {
 public:
  SpecificSharedStage(ParameterStore& store, const std::string& name, std::size_t in_dim,
                      std::size_t task_count, std::size_t shared, std::size_t specific,
                      const std::vector<std::size_t>& expert_hidden,
                      const FeedForward::Options& options, std::mt19937_64& init_rng);

  StageOutput forward(Graph& g, std::span<const Var> inputs, std::mt19937_64& dropout_rng) const;

  std::size_t out_dim() const { return shared_.front().out_dim(); }
  std::size_t task_count() const { return gates_.size(); }
  const std::vector<FeedForward>& shared_experts() const { return shared_; }
  const std::vector<FeedForward>& specific_experts(std::size_t task) const {
    return specific_.at(task);
  }
  const std::vector<Gate>& gates() const { return gates_; }

  // Parameter-name prefixes, used by gradient-isolation checks.
  std::string specific_prefix(std::size_t task) const;
  std::string shared_prefix() const;

 private:
  std::string name_;
  std::vector<FeedForward> shared_;
  std::vector<std::vector<FeedForward>> specific_;
  std::vector<Gate> gates_;
};

}  // namespace mlpr::model
