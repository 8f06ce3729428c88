#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mlpr/eval/report.hpp"
#include "mlpr/harness/trainer.hpp"

namespace mlpr::harness {

// Per-query NDCG values keyed by query_id, for one (task, k).
using PerQuery = std::map<std::string, double>;

struct Evaluation {
  std::vector<eval::MetricRow> rows;  // task-major: AUC, then NDCG@k for each k
  // [task][k index] -> per-query NDCG of the queries that were not skipped.
  std::array<std::vector<PerQuery>, model::kTaskCount> ndcg_by_query;
};

// Pair-level AUC of each task's labels, and per-query NDCG@k with that
// task's counts as gains, averaged over queries with at least one nonzero
// gain. Undefined metrics are reported with an empty value.
Evaluation evaluate(const std::string& variant, const Records& records, const TaskScores& scores,
                    const std::vector<std::size_t>& ks);

// Ground-truth label probabilities as scores. Needs truth columns.
TaskScores oracle_scores(const Records& records);

// The same metrics within three impression groups: at or below the 25th
// percentile, between the 25th and 75th, above the 75th. The group is
// appended to the variant name ("<variant>|impr_p0_25" and so on).
std::vector<eval::MetricRow> evaluate_by_impression_percentile(const std::string& variant,
                                                               const Records& records,
                                                               const TaskScores& scores,
                                                               const std::vector<std::size_t>& ks);

struct TTestRow {
  std::string variant_a;
  std::string variant_b;
  std::string task;
  std::size_t k = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double t = 0.0;
  double p_value = 1.0;
  std::size_t n_queries = 0;
};

// Paired two-tailed t-test of per-query NDCG@k over queries scored by both
// runs. Tasks with fewer than two shared queries are left out.
std::vector<TTestRow> compare(const std::string& variant_a, const Evaluation& a,
                              const std::string& variant_b, const Evaluation& b,
                              const std::vector<std::size_t>& ks);

void save_ttest_csv(const std::vector<TTestRow>& rows, const std::filesystem::path& path);

}  // namespace mlpr::harness
