#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mlpr/model/config.hpp"
#include "mlpr/model/extraction.hpp"
#include "mlpr/model/prediction_head.hpp"

namespace mlpr::model {

struct ForwardResult {
  std::array<Var, kTaskCount> towers;       // t^k
  std::array<Var, kTaskCount> conditional;  // head outputs p^k
  std::array<Var, kTaskCount> predicted;    // transferred (or equal to conditional)
  std::vector<Var> gate_weights;            // every extraction gate, stage order
  std::vector<Var> attention_weights;       // every attention softmax row block
};

// The configured ranking network. Parameters live in the owned store, at
// stable addresses, so the model itself is neither copyable nor movable.
class RankingModel {
 public:
  RankingModel(const ModelConfig& config, std::size_t input_dim, std::uint64_t seed);

  RankingModel(const RankingModel&) = delete;
  RankingModel& operator=(const RankingModel&) = delete;

  ForwardResult forward(Graph& g, Var x, std::mt19937_64& dropout_rng) const;

  const ModelConfig& config() const { return config_; }
  std::size_t input_dim() const { return input_dim_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  // Present only for the matching configuration.
  const SharedPoolStage* stage1() const { return stage1_.get(); }
  const SpecificSharedStage* stage2() const { return stage2_.get(); }

  // Prefix owning every parameter of task k in single-task mode ("task<k>/").
  static std::string single_task_prefix(std::size_t task);

 private:
  ModelConfig config_;
  std::size_t input_dim_;
  ParameterStore store_;

  std::unique_ptr<SharedPoolStage> stage1_;
  std::unique_ptr<SpecificSharedStage> stage2_;
  std::unique_ptr<FeedForward> shared_bottom_;
  std::vector<FeedForward> task_bottoms_;  // single-task mode
  std::vector<Tower> towers_;
  std::vector<AttentionUnit> attention_;
  std::vector<ProbabilityHead> heads_;
};

}  // namespace mlpr::model
