#include "mlpr/harness/evaluate.hpp"

#include <algorithm>
#include <fstream>

#include "mlpr/data/tsv.hpp"
#include "mlpr/error.hpp"
#include "mlpr/eval/metrics.hpp"

namespace mlpr::harness {

namespace {

std::map<std::string, std::vector<std::size_t>> group_by_query(const Records& records) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].query_id].push_back(i);
  return groups;
}

std::string task_name(std::size_t k) { return std::string(model::kTaskNames[k]); }

}  // namespace

Evaluation evaluate(const std::string& variant, const Records& records, const TaskScores& scores,
                    const std::vector<std::size_t>& ks) {
  for (const auto& s : scores) {
    if (s.size() != records.size()) {
      throw DimensionError("evaluate: " + std::to_string(s.size()) + " scores for " +
                           std::to_string(records.size()) + " records");
    }
  }
  const auto groups = group_by_query(records);
  Evaluation out;
  for (std::size_t task = 0; task < model::kTaskCount; ++task) {
    std::vector<double> labels(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) labels[i] = records[i].label(task) ? 1.0 : 0.0;
    eval::MetricRow auc_row{variant, task_name(task), "AUC", std::nullopt, std::nullopt, groups.size(), 0};
    try {
      auc_row.value = eval::auc(scores[task], labels);
    } catch (const UndefinedMetricError&) {
      // reported as NA
    }
    out.rows.push_back(auc_row);

    for (std::size_t k : ks) {
      PerQuery per_query;
      std::size_t skipped = 0;
      for (const auto& [query_id, rows] : groups) {
        std::vector<eval::ScoredItem> items;
        items.reserve(rows.size());
        for (std::size_t i : rows) {
          items.push_back({records[i].item_id, scores[task][i], static_cast<double>(records[i].count(task))});
        }
        if (const auto v = eval::ndcg_at_k(eval::ranked_gains(std::move(items)), k)) {
          per_query.emplace(query_id, *v);
        } else {
          ++skipped;
        }
      }
      std::vector<double> values;
      values.reserve(per_query.size());
      for (const auto& [q, v] : per_query) values.push_back(v);
      eval::MetricRow row{variant, task_name(task), "NDCG", k, std::nullopt, per_query.size(), skipped};
      if (!values.empty()) row.value = eval::compensated_mean(values);
      out.rows.push_back(row);
      out.ndcg_by_query[task].push_back(std::move(per_query));
    }
  }
  return out;
}

TaskScores oracle_scores(const Records& records) {
  TaskScores scores;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < model::kTaskCount; ++k) {
      scores[k].push_back(data::label_probability(r, k));
    }
  }
  return scores;
}

std::vector<eval::MetricRow> evaluate_by_impression_percentile(const std::string& variant,
                                                               const Records& records,
                                                               const TaskScores& scores,
                                                               const std::vector<std::size_t>& ks) {
  if (records.empty()) throw ContractError("percentile grouping of an empty record set");
  std::vector<std::uint32_t> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(r.impressions);
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank percentiles.
  const auto rank = [&](std::size_t pct) { return sorted[(pct * sorted.size() + 99) / 100 - 1]; };
  const std::uint32_t q25 = rank(25);
  const std::uint32_t q75 = rank(75);

  const std::array<const char*, 3> names{"impr_p0_25", "impr_p25_75", "impr_p75_100"};
  std::array<Records, 3> parts;
  std::array<TaskScores, 3> part_scores;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto n = records[i].impressions;
    const std::size_t g = n <= q25 ? 0 : (n <= q75 ? 1 : 2);
    parts[g].push_back(records[i]);
    for (std::size_t k = 0; k < model::kTaskCount; ++k) part_scores[g][k].push_back(scores[k][i]);
  }
  std::vector<eval::MetricRow> rows;
  for (std::size_t g = 0; g < 3; ++g) {
    const auto e = evaluate(variant + "|" + names[g], parts[g], part_scores[g], ks);
    rows.insert(rows.end(), e.rows.begin(), e.rows.end());
  }
  return rows;
}

std::vector<TTestRow> compare(const std::string& variant_a, const Evaluation& a,
                              const std::string& variant_b, const Evaluation& b,
                              const std::vector<std::size_t>& ks) {
  std::vector<TTestRow> out;
  for (std::size_t task = 0; task < model::kTaskCount; ++task) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      const auto& qa = a.ndcg_by_query[task].at(ki);
      const auto& qb = b.ndcg_by_query[task].at(ki);
      std::vector<double> va, vb;
      for (const auto& [query, v] : qa) {
        if (const auto it = qb.find(query); it != qb.end()) {
          va.push_back(v);
          vb.push_back(it->second);
        }
      }
      if (va.size() < 2) continue;
      const auto t = eval::paired_t_test(va, vb);
      out.push_back({variant_a, variant_b, task_name(task), ks[ki], eval::compensated_mean(va),
                     eval::compensated_mean(vb), t.t, t.p_value, t.n});
    }
  }
  return out;
}

void save_ttest_csv(const std::vector<TTestRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "variant_a,variant_b,task,metric,k,mean_a,mean_b,t,p_value,n_queries,granularity\n";
  for (const auto& r : rows) {
    out << eval::csv_field(r.variant_a) << ',' << eval::csv_field(r.variant_b) << ',' << r.task
        << ",NDCG," << r.k << ',' << data::format_double(r.mean_a) << ','
        << data::format_double(r.mean_b) << ',' << data::format_double(r.t) << ','
        << data::format_double(r.p_value) << ',' << r.n_queries << ",per-query\n";
  }
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

}  // namespace mlpr::harness
