#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlpr/autodiff/tensor.hpp"
#include "mlpr/data/record.hpp"
#include "mlpr/features/embedding.hpp"
#include "mlpr/features/pipeline.hpp"
#include "mlpr/harness/run_config.hpp"
#include "mlpr/model/config.hpp"

namespace mlpr::harness {

std::unique_ptr<features::EmbeddingProvider> make_provider(const EmbeddingConfig& config);

// z-score statistics of the ranking features of `train`.
features::NormalizationStats fit_ranking_stats(const std::vector<data::EngagementRecord>& train);

// Query and item embeddings encoded once per id, plus the normalization used
// to turn a record into a model input row.
class FeatureCache {
 public:
  FeatureCache(const features::EmbeddingProvider& provider, features::NormalizationStats stats);

  // Encodes any query or item of `records` not seen before.
  void add(const std::vector<data::EngagementRecord>& records);

  std::size_t input_dim() const { return layout_.total(); }
  const features::FeatureLayout& layout() const { return layout_; }
  const features::NormalizationStats& stats() const { return stats_; }

  // Writes the model input of `record` into `out` (length input_dim()). The
  // record's query and item must have been added.
  void assemble(const data::EngagementRecord& record, std::span<double> out) const;

 private:
  const features::EmbeddingProvider& provider_;
  features::NormalizationStats stats_;
  features::FeatureLayout layout_;
  std::unordered_map<std::string, std::vector<double>> queries_;
  std::unordered_map<std::string, std::vector<double>> items_;
};

struct Batch {
  ad::Tensor x;                                      // [B, input_dim]
  std::array<ad::Tensor, model::kTaskCount> labels;  // [B, 1] each
  ad::Tensor impressions;                            // [B, 1]
};

Batch make_batch(const FeatureCache& cache, const std::vector<data::EngagementRecord>& records,
                 std::span<const std::size_t> rows);

}  // namespace mlpr::harness
