#include "mlpr/model/config.hpp"

#include "mlpr/error.hpp"

namespace mlpr::model {

void ModelConfig::validate() const {
  if (single_task &&
      (uncertainty_loss || specific_experts || attention_units || probability_transfer)) {
    throw ContractError(
        "single_task excludes uncertainty_loss, specific_experts, attention_units and "
        "probability_transfer");
  }
  if (expert_hidden.empty()) throw ContractError("expert_hidden must list at least one width");
  for (std::size_t w : expert_hidden) {
    if (w == 0) throw ContractError("expert widths must be positive");
  }
  for (std::size_t w : tower_hidden) {
    if (w == 0) throw ContractError("tower widths must be positive");
  }
  if (stage1_experts == 0 || stage2_shared == 0 || stage2_specific == 0 || tower_dim == 0) {
    throw ContractError("expert counts and tower_dim must be at least 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("dropout must be in [0, 1)");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    throw ContractError("bn_momentum must be in [0, 1]");
  }
  if (!(bn_eps > 0.0)) throw ContractError("bn_eps must be positive");
}

}  // namespace mlpr::model
