#include "mlpr/data/record.hpp"

#include <cmath>

#include "mlpr/error.hpp"

namespace mlpr::data {

bool EngagementRecord::label(std::size_t task) const { return count(task) > 0; }

std::uint32_t EngagementRecord::count(std::size_t task) const {
  switch (task) {
    case 0: return clicks;
    case 1: return atcs;
    case 2: return purchases;
  }
  throw ContractError("task index " + std::to_string(task) + " out of range");
}

void validate_funnel(const EngagementRecord& r) {
  if (r.impressions < 1) {
    throw ContractError("pair " + r.query_id + "/" + r.item_id + " has no impressions");
  }
  if (!(r.purchases <= r.atcs && r.atcs <= r.clicks && r.clicks <= r.impressions)) {
    throw ContractError("pair " + r.query_id + "/" + r.item_id +
                        " violates funnel order (impressions " + std::to_string(r.impressions) +
                        ", clicks " + std::to_string(r.clicks) + ", atcs " +
                        std::to_string(r.atcs) + ", purchases " + std::to_string(r.purchases) +
                        ")");
  }
}

double label_probability(const EngagementRecord& r, std::size_t task) {
  if (!r.truth) throw ContractError("pair " + r.query_id + "/" + r.item_id + " has no ground truth");
  const double stages[] = {r.truth->p_click, r.truth->p_atc, r.truth->p_purchase};
  if (task > 2) throw ContractError("task index " + std::to_string(task) + " out of range");
  double per_impression = 1.0;
  for (std::size_t k = 0; k <= task; ++k) per_impression *= stages[k];
  // 1 - (1 - q)^n, computed without cancellation for small q.
  return -std::expm1(static_cast<double>(r.impressions) * std::log1p(-per_impression));
}

}  // namespace mlpr::data
