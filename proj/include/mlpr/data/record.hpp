#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlpr/features/embedding.hpp"

namespace mlpr::data {

// Per-impression stage probabilities the generator sampled from:
// p(click), p(atc | click), p(purchase | atc).
struct GroundTruth {
  double p_click = 0.0;
  double p_atc = 0.0;
  double p_purchase = 0.0;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// One query-item pair with its engagement counts.
struct EngagementRecord {
  std::string query_id;
  std::string item_id;
  std::string query_text;
  std::string item_title;
  std::string item_type;
  std::string item_brand;
  std::string item_color;
  std::string item_gender;
  std::uint32_t impressions = 1;
  std::uint32_t clicks = 0;
  std::uint32_t atcs = 0;
  std::uint32_t purchases = 0;
  std::vector<double> ranking_features;
  std::optional<GroundTruth> truth;

  bool y_click() const { return clicks > 0; }
  bool y_atc() const { return atcs > 0; }
  bool y_purchase() const { return purchases > 0; }
  // Binary label / event count for task 0 (click), 1 (atc), 2 (purchase).
  bool label(std::size_t task) const;
  std::uint32_t count(std::size_t task) const;

  features::QueryRecord query() const { return {query_id, query_text}; }
  features::ItemRecord item() const {
    return {item_id, item_title, item_type, item_brand, item_color, item_gender};
  }

  friend bool operator==(const EngagementRecord&, const EngagementRecord&) = default;
};

// Throws ContractError unless impressions >= 1 and
// purchases <= atcs <= clicks <= impressions.
void validate_funnel(const EngagementRecord& record);

// Probability that task `task`'s binary label is 1 under the record's ground
// truth: 1 - (1 - prod_{j <= task} p_j)^impressions. Requires ground truth.
double label_probability(const EngagementRecord& record, std::size_t task);

}  // namespace mlpr::data
