#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mlpr::eval {

// Mann-Whitney AUC from average ranks: ties count half. Labels must be 0 or
// 1; single-class input throws UndefinedMetricError.
double auc(std::span<const double> scores, std::span<const double> labels);

// sum_{pos=1..k} gain_pos / log2(pos + 1) over gains already in rank order.
double dcg_at_k(std::span<const double> ranked_gains, std::size_t k);

// DCG@k normalized by the DCG@k of the gains sorted descending. Returns
// nullopt when every gain is zero (the query is skipped). k < 1 throws
// ContractError.
std::optional<double> ndcg_at_k(std::span<const double> ranked_gains, std::size_t k);

struct ScoredItem {
  std::string item_id;
  double score = 0.0;
  double gain = 0.0;
};

// Orders by descending score, ties by ascending item_id. Non-finite scores
// throw ContractError.
void rank_items(std::vector<ScoredItem>& items);

// Gains of `items` in ranked order.
std::vector<double> ranked_gains(std::vector<ScoredItem> items);

// Sorted copy, element at ceil(0.99 n) - 1. Empty input throws ContractError.
double p99(std::span<const double> samples_ms);

// Neumaier-compensated sum and mean.
double compensated_sum(std::span<const double> values);
double compensated_mean(std::span<const double> values);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Paired two-tailed t-test of a - b (same length, n >= 2).
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace mlpr::eval
