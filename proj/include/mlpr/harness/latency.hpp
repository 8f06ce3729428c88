#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mlpr/harness/trainer.hpp"

namespace mlpr::harness {

enum class LatencyMode {
  precompute,  // item embeddings encoded before timing starts
  recompute,   // item embeddings encoded inside the timed loop
};

std::string_view latency_mode_name(LatencyMode mode);
LatencyMode latency_mode_from_name(std::string_view name);

struct HostInfo {
  std::string hostname;
  std::string cpu_model;
  unsigned hardware_threads = 0;
  std::string compiler;
  std::string build_type;
};

HostInfo host_info();

// One query and the candidate pairs ranked for it.
struct CandidateList {
  features::QueryRecord query;
  Records candidates;
};

// `queries` lists of exactly `candidates` pairs built from `records`. Each
// query keeps its own pairs and is topped up with other items of the set, in
// a fixed order. Too few queries or distinct items throws ContractError.
std::vector<CandidateList> candidate_lists(const Records& records, std::size_t queries,
                                           std::size_t candidates);

struct LatencyReport {
  LatencyMode mode = LatencyMode::precompute;
  std::size_t queries = 0;
  std::size_t candidates = 0;
  std::size_t repeats = 1;
  std::vector<double> samples_ms;  // one per query, list order
  double p99_ms = 0.0;
  double mean_ms = 0.0;
};

// Times encode + assemble + forward + sort for every list, after `warmup`
// untimed rounds. Each list is ranked `repeats` times per mode and its sample
// is the median. Modes are interleaved within each repeat (alternating which
// goes first), so host noise lands on all of them alike. One report per mode.
std::vector<LatencyReport> bench_latency(const TrainedModel& trained,
                                         const std::vector<CandidateList>& lists,
                                         const std::vector<LatencyMode>& modes, std::size_t warmup,
                                         std::size_t repeats);

nlohmann::json to_json(const LatencyReport& report, const HostInfo& host);

}  // namespace mlpr::harness
