#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace mlpr::model {

inline constexpr std::size_t kTaskCount = 3;

// Funnel order: impression -> click -> add-to-cart -> purchase.
enum class Task : std::size_t { click = 0, atc = 1, purchase = 2 };

inline constexpr std::array<std::string_view, kTaskCount> kTaskNames{"click", "atc", "purchase"};

// How an attention unit turns its token sequence into a^k.
enum class AttentionReadout {
  position,  // output at the t^k token
  mean,      // mean of both token outputs
};

struct ModelConfig {
  // Component toggles. With every toggle off the model is a shared-bottom
  // multi-task MLP with fixed-weight loss.
  bool uncertainty_loss = true;
  bool specific_experts = true;  // two-stage extraction instead of a shared MLP bottom
  bool attention_units = true;
  bool probability_transfer = true;
  bool single_task = false;      // three disjoint single-task MLPs
  // Ablation stand-in for encoder fine-tuning: the hash-encoder seed is picked
  // by a supervised probe on the training split. Not the real thing.
  bool feature_refresh = false;

  std::vector<std::size_t> expert_hidden{512, 256, 128};
  std::size_t stage1_experts = 4;
  std::size_t stage2_shared = 2;
  std::size_t stage2_specific = 2;
  std::vector<std::size_t> tower_hidden{64};
  std::size_t tower_dim = 32;

  double dropout = 0.2;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  AttentionReadout attention_readout = AttentionReadout::position;

  // Throws ContractError on an inconsistent configuration.
  void validate() const;
};

}  // namespace mlpr::model
