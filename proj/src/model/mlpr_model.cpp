#include "mlpr/model/mlpr_model.hpp"

#include "mlpr/error.hpp"

namespace mlpr::model {

std::string RankingModel::single_task_prefix(std::size_t task) {
  return "task" + std::to_string(task) + "/";
}

RankingModel::RankingModel(const ModelConfig& config, std::size_t input_dim, std::uint64_t seed)
    : config_(config), input_dim_(input_dim) {
  config_.validate();
  if (input_dim == 0) throw ContractError("model input dimension must be positive");
  std::mt19937_64 rng(seed);
  const FeedForward::Options expert_options{true, config_.dropout, config_.bn_momentum,
                                            config_.bn_eps};

  if (config_.single_task) {
    for (std::size_t k = 0; k < kTaskCount; ++k) {
      const std::string p = single_task_prefix(k);
      task_bottoms_.emplace_back(store_, p + "bottom", input_dim, config_.expert_hidden,
                                 expert_options, rng);
      towers_.emplace_back(store_, p + "tower", task_bottoms_.back().out_dim(),
                           config_.tower_hidden, config_.tower_dim, true, rng);
      heads_.emplace_back(store_, p + "head", config_.tower_dim, rng);
    }
    return;
  }

  std::size_t bottom_dim = 0;
  if (config_.specific_experts) {
    stage1_ = std::make_unique<SharedPoolStage>(store_, "stage1", input_dim, kTaskCount,
                                                config_.stage1_experts, config_.expert_hidden,
                                                expert_options, rng);
    stage2_ = std::make_unique<SpecificSharedStage>(
        store_, "stage2", stage1_->out_dim(), kTaskCount, config_.stage2_shared,
        config_.stage2_specific, config_.expert_hidden, expert_options, rng);
    bottom_dim = stage2_->out_dim();
  } else {
    shared_bottom_ = std::make_unique<FeedForward>(store_, "bottom", input_dim,
                                                   config_.expert_hidden, expert_options, rng);
    bottom_dim = shared_bottom_->out_dim();
  }
  for (std::size_t k = 0; k < kTaskCount; ++k) {
    const std::string suffix = std::to_string(k);
    towers_.emplace_back(store_, "tower" + suffix, bottom_dim, config_.tower_hidden,
                         config_.tower_dim, true, rng);
    if (config_.attention_units) {
      attention_.emplace_back(store_, "attention" + suffix, config_.tower_dim,
                              config_.attention_readout, rng);
    }
    heads_.emplace_back(store_, "head" + suffix, config_.tower_dim, rng);
  }
}

ForwardResult RankingModel::forward(Graph& g, Var x, std::mt19937_64& dropout_rng) const {
  if (x.value().rank() != 2 || x.value().cols() != input_dim_) {
    throw DimensionError("model expects input [B, " + std::to_string(input_dim_) + "], got " +
                         ad::shape_string(x.shape()));
  }
  ForwardResult out;

  std::array<Var, kTaskCount> bottoms;
  if (config_.single_task) {
    for (std::size_t k = 0; k < kTaskCount; ++k) {
      bottoms[k] = task_bottoms_[k].forward(g, x, dropout_rng);
    }
  } else if (config_.specific_experts) {
    StageOutput s1 = stage1_->forward(g, x, dropout_rng);
    StageOutput s2 = stage2_->forward(g, s1.per_task, dropout_rng);
    out.gate_weights = s1.gate_weights;
    out.gate_weights.insert(out.gate_weights.end(), s2.gate_weights.begin(),
                            s2.gate_weights.end());
    for (std::size_t k = 0; k < kTaskCount; ++k) bottoms[k] = s2.per_task[k];
  } else {
    Var shared = shared_bottom_->forward(g, x, dropout_rng);
    bottoms.fill(shared);
  }

  std::optional<Var> previous;
  for (std::size_t k = 0; k < kTaskCount; ++k) {
    out.towers[k] = towers_[k].forward(g, bottoms[k]);
    Var a = out.towers[k];
    if (config_.attention_units) {
      AttentionUnit::Result r = attention_[k].forward(g, out.towers[k], previous);
      a = r.output;
      out.attention_weights.insert(out.attention_weights.end(), r.weights.begin(),
                                   r.weights.end());
      previous = a;
    }
    out.conditional[k] = heads_[k].forward(g, a);
  }
  out.predicted =
      config_.probability_transfer ? probability_transfer(out.conditional) : out.conditional;
  return out;
}

}  // namespace mlpr::model
