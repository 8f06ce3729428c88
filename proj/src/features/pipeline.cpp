#include "mlpr/features/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>

#include "mlpr/error.hpp"

namespace mlpr::features {

namespace {

std::atomic<int> zero_vector_warnings{0};

void check_segment(Segment segment, std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw DimensionError("feature segment '" + std::string(segment_name(segment)) +
                         "' expects length " + std::to_string(expected) + ", got " +
                         std::to_string(got));
  }
}

double cosine_of(std::span<const double> q, std::span<const double> i) {
  double dot = 0.0, nq = 0.0, ni = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    dot += q[j] * i[j];
    nq += q[j] * q[j];
    ni += i[j] * i[j];
  }
  if (nq == 0.0 || ni == 0.0) {
    if (zero_vector_warnings.fetch_add(1) < 5) {
      spdlog::warn("cosine of a zero embedding vector; using 0");
    }
    return 0.0;
  }
  return std::clamp(dot / (std::sqrt(nq) * std::sqrt(ni)), -1.0, 1.0);
}

}  // namespace

Interactions interactions(std::span<const double> query, std::span<const double> item) {
  if (query.size() != item.size()) {
    throw DimensionError("interactions: query length " + std::to_string(query.size()) +
                         " != item length " + std::to_string(item.size()));
  }
  Interactions out;
  out.cosine = cosine_of(query, item);
  out.hadamard.resize(query.size());
  for (std::size_t j = 0; j < query.size(); ++j) out.hadamard[j] = query[j] * item[j];
  out.concat.reserve(2 * query.size());
  out.concat.insert(out.concat.end(), query.begin(), query.end());
  out.concat.insert(out.concat.end(), item.begin(), item.end());
  return out;
}

NormalizationStats zscore_fit(std::span<const std::vector<double>> rows, std::string fitted_split) {
  if (rows.size() < 2) {
    throw ContractError("zscore_fit needs at least 2 rows, got " + std::to_string(rows.size()));
  }
  const std::size_t cols = rows.front().size();
  NormalizationStats stats;
  stats.fitted_split = std::move(fitted_split);
  stats.mean.assign(cols, 0.0);
  stats.std.assign(cols, 0.0);
  for (const auto& row : rows) {
    check_segment(Segment::ranking, cols, row.size());
    for (std::size_t c = 0; c < cols; ++c) stats.mean[c] += row[c];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : stats.mean) m /= n;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - stats.mean[c];
      stats.std[c] += d * d;
    }
  }
  for (double& s : stats.std) s = std::sqrt(s / n);
  return stats;
}

std::vector<double> zscore_apply(const NormalizationStats& stats, std::span<const double> features) {
  check_segment(Segment::ranking, stats.mean.size(), features.size());
  std::vector<double> out(features.size());
  for (std::size_t c = 0; c < features.size(); ++c) {
    out[c] = (features[c] - stats.mean[c]) / std::max(stats.std[c], kStdFloor);
  }
  return out;
}

std::string_view segment_name(Segment segment) {
  switch (segment) {
    case Segment::query: return "query";
    case Segment::item: return "item";
    case Segment::cosine: return "cosine";
    case Segment::hadamard: return "hadamard";
    case Segment::concat: return "concat";
    case Segment::ranking: return "ranking";
  }
  return "unknown";
}

std::size_t FeatureLayout::length(Segment segment) const {
  switch (segment) {
    case Segment::query:
    case Segment::item:
    case Segment::hadamard:
      return dim;
    case Segment::cosine:
      return 1;
    case Segment::concat:
      return 2 * dim;
    case Segment::ranking:
      return feature_count;
  }
  return 0;
}

std::size_t FeatureLayout::offset(Segment segment) const {
  switch (segment) {
    case Segment::query: return 0;
    case Segment::item: return dim;
    case Segment::cosine: return 2 * dim;
    case Segment::hadamard: return 2 * dim + 1;
    case Segment::concat: return 3 * dim + 1;
    case Segment::ranking: return 5 * dim + 1;
  }
  return 0;
}

FeatureVector::FeatureVector(FeatureLayout layout, std::vector<double> values)
    : layout_(layout), values_(std::move(values)) {
  if (values_.size() != layout_.total()) {
    throw DimensionError("feature vector of length " + std::to_string(values_.size()) +
                         " does not match layout total " + std::to_string(layout_.total()));
  }
}

std::span<const double> FeatureVector::segment(Segment segment) const {
  return std::span<const double>(values_).subspan(layout_.offset(segment), layout_.length(segment));
}

FeatureVector assemble(std::span<const double> query, std::span<const double> item,
                       const Interactions& inter, std::span<const double> normalized_ranking) {
  const FeatureLayout layout{query.size(), normalized_ranking.size()};
  check_segment(Segment::item, layout.dim, item.size());
  check_segment(Segment::hadamard, layout.dim, inter.hadamard.size());
  check_segment(Segment::concat, 2 * layout.dim, inter.concat.size());

  std::vector<double> values;
  values.reserve(layout.total());
  values.insert(values.end(), query.begin(), query.end());
  values.insert(values.end(), item.begin(), item.end());
  values.push_back(inter.cosine);
  values.insert(values.end(), inter.hadamard.begin(), inter.hadamard.end());
  values.insert(values.end(), inter.concat.begin(), inter.concat.end());
  values.insert(values.end(), normalized_ranking.begin(), normalized_ranking.end());
  return FeatureVector(layout, std::move(values));
}

void assemble_into(std::span<const double> query, std::span<const double> item,
                   std::span<const double> normalized_ranking, std::span<double> out) {
  const FeatureLayout layout{query.size(), normalized_ranking.size()};
  check_segment(Segment::item, layout.dim, item.size());
  if (out.size() != layout.total()) {
    throw DimensionError("assemble_into: output length " + std::to_string(out.size()) +
                         " != layout total " + std::to_string(layout.total()));
  }
  const std::size_t d = layout.dim;
  std::copy(query.begin(), query.end(), out.begin());
  std::copy(item.begin(), item.end(), out.begin() + static_cast<std::ptrdiff_t>(d));
  out[2 * d] = cosine_of(query, item);
  for (std::size_t j = 0; j < d; ++j) out[2 * d + 1 + j] = query[j] * item[j];
  std::copy(query.begin(), query.end(), out.begin() + static_cast<std::ptrdiff_t>(3 * d + 1));
  std::copy(item.begin(), item.end(), out.begin() + static_cast<std::ptrdiff_t>(4 * d + 1));
  std::copy(normalized_ranking.begin(), normalized_ranking.end(),
            out.begin() + static_cast<std::ptrdiff_t>(5 * d + 1));
}

}  // namespace mlpr::features
