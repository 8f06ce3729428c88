#include "mlpr/harness/feature_cache.hpp"

#include "mlpr/error.hpp"

namespace mlpr::harness {

std::unique_ptr<features::EmbeddingProvider> make_provider(const EmbeddingConfig& config) {
  if (config.mode == EmbeddingMode::file) {
    return std::make_unique<features::FileEmbeddingProvider>(config.query_file, config.item_file,
                                                             config.dim);
  }
  return std::make_unique<features::HashEncoder>(config.dim, config.seed);
}

features::NormalizationStats fit_ranking_stats(const std::vector<data::EngagementRecord>& train) {
  std::vector<std::vector<double>> rows;
  rows.reserve(train.size());
  for (const auto& r : train) rows.push_back(r.ranking_features);
  return features::zscore_fit(rows, "train");
}

FeatureCache::FeatureCache(const features::EmbeddingProvider& provider,
                           features::NormalizationStats stats)
    : provider_(provider), stats_(std::move(stats)) {
  layout_.dim = provider_.dim();
  layout_.feature_count = stats_.mean.size();
}

void FeatureCache::add(const std::vector<data::EngagementRecord>& records) {
  for (const auto& r : records) {
    if (!queries_.count(r.query_id)) queries_.emplace(r.query_id, provider_.encode_query(r.query()));
    if (!items_.count(r.item_id)) items_.emplace(r.item_id, provider_.encode_item(r.item()));
  }
}

void FeatureCache::assemble(const data::EngagementRecord& record, std::span<double> out) const {
  const auto q = queries_.find(record.query_id);
  const auto i = items_.find(record.item_id);
  if (q == queries_.end()) throw MissingEmbeddingError(record.query_id);
  if (i == items_.end()) throw MissingEmbeddingError(record.item_id);
  const auto ranking = features::zscore_apply(stats_, record.ranking_features);
  features::assemble_into(q->second, i->second, ranking, out);
}

Batch make_batch(const FeatureCache& cache, const std::vector<data::EngagementRecord>& records,
                 std::span<const std::size_t> rows) {
  const std::size_t b = rows.size();
  const std::size_t d = cache.input_dim();
  Batch batch;
  batch.x = ad::Tensor({b, d});
  for (auto& l : batch.labels) l = ad::Tensor({b, 1});
  batch.impressions = ad::Tensor({b, 1});
  for (std::size_t n = 0; n < b; ++n) {
    const auto& r = records.at(rows[n]);
    cache.assemble(r, batch.x.data().subspan(n * d, d));
    for (std::size_t k = 0; k < model::kTaskCount; ++k) batch.labels[k][n] = r.label(k) ? 1.0 : 0.0;
    batch.impressions[n] = static_cast<double>(r.impressions);
  }
  return batch;
}

}  // namespace mlpr::harness
