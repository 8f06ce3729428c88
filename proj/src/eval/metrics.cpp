#include "mlpr/eval/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "mlpr/error.hpp"

namespace mlpr::eval {

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("auc: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(labels.size()) + " labels");
  }
  std::size_t positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) throw ContractError("auc: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw ContractError("auc: non-finite score");
    positives += labels[i] == 1.0;
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc undefined: " + std::to_string(positives) + " positives, " +
                               std::to_string(negatives) + " negatives");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based average ranks of the positives. Ranks are half-integers,
  // exact in double at any realistic size.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t tied_positives = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tied_positives += labels[order[j]] == 1.0;
      ++j;
    }
    const double average_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += average_rank * static_cast<double>(tied_positives);
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double dcg_at_k(std::span<const double> ranked_gains, std::size_t k) {
  if (k < 1) throw ContractError("ndcg cutoff k must be at least 1");
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranked_gains.size());
  for (std::size_t pos = 1; pos <= n; ++pos) {
    dcg += ranked_gains[pos - 1] / std::log2(static_cast<double>(pos) + 1.0);
  }
  return dcg;
}

std::optional<double> ndcg_at_k(std::span<const double> ranked_gains, std::size_t k) {
  if (k < 1) throw ContractError("ndcg cutoff k must be at least 1");
  std::vector<double> ideal(ranked_gains.begin(), ranked_gains.end());
  for (double g : ideal) {
    if (!(g >= 0.0)) throw ContractError("ndcg gains must be nonnegative");
  }
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double best = dcg_at_k(ideal, k);
  if (best == 0.0) return std::nullopt;
  return dcg_at_k(ranked_gains, k) / best;
}

void rank_items(std::vector<ScoredItem>& items) {
  for (const auto& it : items) {
    if (!std::isfinite(it.score)) throw ContractError("non-finite score for item " + it.item_id);
  }
  std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
}

std::vector<double> ranked_gains(std::vector<ScoredItem> items) {
  rank_items(items);
  std::vector<double> gains;
  gains.reserve(items.size());
  for (const auto& it : items) gains.push_back(it.gain);
  return gains;
}

double p99(std::span<const double> samples_ms) {
  if (samples_ms.empty()) throw ContractError("p99 of an empty sample");
  std::vector<double> sorted(samples_ms.begin(), samples_ms.end());
  std::sort(sorted.begin(), sorted.end());
  // ceil(0.99 n) in integer arithmetic.
  const std::size_t rank = (99 * sorted.size() + 99) / 100;
  return sorted[rank - 1];
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0, carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + carry;
}

double compensated_mean(std::span<const double> values) {
  if (values.empty()) throw ContractError("mean of an empty sample");
  return compensated_sum(values) / static_cast<double>(values.size());
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("paired t-test needs equal-length samples");
  if (a.size() < 2) throw UndefinedMetricError("paired t-test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double mean = compensated_mean(d);
  std::vector<double> sq(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) sq[i] = (d[i] - mean) * (d[i] - mean);
  const double n = static_cast<double>(d.size());
  const double sd = std::sqrt(compensated_sum(sq) / (n - 1.0));

  TTestResult r;
  r.n = d.size();
  if (sd == 0.0) {
    r.t = mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
    r.p_value = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1.0);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace mlpr::eval
