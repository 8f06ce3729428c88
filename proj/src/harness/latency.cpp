#include "mlpr/harness/latency.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <thread>
#include <unistd.h>
#include <unordered_map>
#include <unordered_set>

#include "mlpr/error.hpp"
#include "mlpr/eval/metrics.hpp"

namespace mlpr::harness {

std::string_view latency_mode_name(LatencyMode mode) {
  return mode == LatencyMode::precompute ? "precompute" : "recompute";
}

LatencyMode latency_mode_from_name(std::string_view name) {
  if (name == "precompute") return LatencyMode::precompute;
  if (name == "recompute") return LatencyMode::recompute;
  throw ContractError("latency mode must be 'precompute' or 'recompute', got '" + std::string(name) + "'");
}

HostInfo host_info() {
  HostInfo h;
  char name[256] = {};
  if (gethostname(name, sizeof(name) - 1) == 0) h.hostname = name;
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.rfind("model name", 0) == 0) {
      if (const auto colon = line.find(':'); colon != std::string::npos) {
        h.cpu_model = line.substr(std::min(colon + 2, line.size()));
      }
      break;
    }
  }
  h.hardware_threads = std::thread::hardware_concurrency();
#if defined(__clang__)
  h.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  h.compiler = "gcc " __VERSION__;
#endif
#ifdef NDEBUG
  h.build_type = "release";
#else
  h.build_type = "debug";
#endif
  return h;
}

std::vector<CandidateList> candidate_lists(const Records& records, std::size_t queries,
                                           std::size_t candidates) {
  std::map<std::string, std::vector<std::size_t>> by_query;
  std::map<std::string, std::size_t> item_pool;  // item_id -> first record
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_query[records[i].query_id].push_back(i);
    item_pool.emplace(records[i].item_id, i);
  }
  if (by_query.size() < queries || item_pool.size() < candidates) {
    throw ContractError("latency bench needs " + std::to_string(queries) + " queries and " +
                        std::to_string(candidates) + " distinct items; the split has " +
                        std::to_string(by_query.size()) + " and " + std::to_string(item_pool.size()));
  }
  std::vector<std::size_t> pool;
  for (const auto& [id, row] : item_pool) pool.push_back(row);

  std::vector<CandidateList> lists;
  std::size_t q = 0;
  for (const auto& [query_id, rows] : by_query) {
    if (q == queries) break;
    const auto& head = records[rows.front()];
    CandidateList list{head.query(), {}};
    std::unordered_set<std::string> present;
    for (std::size_t i : rows) {
      if (list.candidates.size() == candidates) break;
      if (present.insert(records[i].item_id).second) list.candidates.push_back(records[i]);
    }
    // Top up with other items, starting at a query-dependent offset.
    for (std::size_t step = 0; list.candidates.size() < candidates; ++step) {
      auto r = records[pool[(q * 7919 + step) % pool.size()]];
      if (!present.insert(r.item_id).second) continue;
      r.query_id = head.query_id;
      r.query_text = head.query_text;
      list.candidates.push_back(std::move(r));
    }
    lists.push_back(std::move(list));
    ++q;
  }
  return lists;
}

std::vector<LatencyReport> bench_latency(const TrainedModel& trained,
                                         const std::vector<CandidateList>& lists,
                                         const std::vector<LatencyMode>& modes, std::size_t warmup,
                                         std::size_t repeats) {
  if (lists.empty()) throw ContractError("latency bench needs at least one candidate list");
  if (modes.empty()) throw ContractError("latency bench needs at least one mode");
  if (repeats == 0) throw ContractError("latency bench needs at least one repeat");
  const auto provider = make_provider(trained.config.embedding);
  const features::FeatureLayout layout{provider->dim(), trained.stats.mean.size()};
  const std::size_t d = layout.total();

  // Only the precompute mode reads this; it is filled before any timing.
  std::unordered_map<std::string, std::vector<double>> item_cache;
  for (const auto& list : lists) {
    for (const auto& r : list.candidates) {
      if (!item_cache.count(r.item_id)) item_cache.emplace(r.item_id, provider->encode_item(r.item()));
    }
  }

  std::mt19937_64 unused_rng(0);
  const auto rank_one = [&](const CandidateList& list, LatencyMode mode) {
    const auto q = provider->encode_query(list.query);
    ad::Tensor x({list.candidates.size(), d});
    std::vector<double> fresh;
    for (std::size_t n = 0; n < list.candidates.size(); ++n) {
      const auto& r = list.candidates[n];
      const std::vector<double>* item = nullptr;
      if (mode == LatencyMode::precompute) {
        item = &item_cache.at(r.item_id);
      } else {
        fresh = provider->encode_item(r.item());
        item = &fresh;
      }
      const auto ranking = features::zscore_apply(trained.stats, r.ranking_features);
      features::assemble_into(q, *item, ranking, x.data().subspan(n * d, d));
    }
    ad::Graph g(ad::Mode::eval);
    const auto forward = trained.model->forward(g, g.constant(x), unused_rng);
    // Final ordering by the last funnel stage.
    const auto scores = forward.predicted[model::kTaskCount - 1].value().data();
    std::vector<eval::ScoredItem> items;
    items.reserve(list.candidates.size());
    for (std::size_t n = 0; n < list.candidates.size(); ++n) {
      items.push_back({list.candidates[n].item_id, scores[n], 0.0});
    }
    eval::rank_items(items);
    return items.front().score;
  };

  volatile double sink = 0.0;
  for (std::size_t w = 0; w < warmup; ++w) {
    for (const auto mode : modes) sink = sink + rank_one(lists[w % lists.size()], mode);
  }

  std::vector<LatencyReport> reports(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) {
    reports[m].mode = modes[m];
    reports[m].queries = lists.size();
    reports[m].candidates = lists.front().candidates.size();
    reports[m].repeats = repeats;
  }
  std::vector<std::vector<double>> runs(modes.size(), std::vector<double>(repeats));
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < repeats; ++r) {
      for (std::size_t j = 0; j < modes.size(); ++j) {
        const std::size_t m = (j + r) % modes.size();
        const auto start = std::chrono::steady_clock::now();
        sink = sink + rank_one(list, modes[m]);
        const auto stop = std::chrono::steady_clock::now();
        runs[m][r] = std::chrono::duration<double, std::milli>(stop - start).count();
      }
    }
    for (std::size_t m = 0; m < modes.size(); ++m) {
      auto& v = runs[m];
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(repeats / 2), v.end());
      reports[m].samples_ms.push_back(v[repeats / 2]);
    }
  }
  for (auto& report : reports) {
    report.p99_ms = eval::p99(report.samples_ms);
    report.mean_ms = eval::compensated_mean(report.samples_ms);
  }
  return reports;
}

nlohmann::json to_json(const LatencyReport& r, const HostInfo& h) {
  return nlohmann::json{
      {"mode", latency_mode_name(r.mode)},
      {"queries", r.queries},
      {"candidates", r.candidates},
      {"repeats_per_query", r.repeats},
      {"p99_ms", r.p99_ms},
      {"mean_ms", r.mean_ms},
      {"samples_ms", r.samples_ms},
      {"host",
       {{"hostname", h.hostname},
        {"cpu_model", h.cpu_model},
        {"hardware_threads", h.hardware_threads},
        {"compiler", h.compiler},
        {"build_type", h.build_type}}},
  };
}

}  // namespace mlpr::harness
