#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mlpr/data/record.hpp"

namespace mlpr::data {

// Link from latent relevance s to a stage probability: sigmoid(a s + b).
struct StageLink {
  double a = 0.0;
  double b = 0.0;
};

struct FunnelParams {
  std::size_t n_queries = 500;
  std::size_t n_items = 4000;
  std::size_t items_per_query = 100;  // candidate pairs emitted per query
  std::size_t latent_dim = 16;
  std::size_t n_topics = 12;
  double same_topic_fraction = 0.4;   // share of a query's candidates drawn from its topic
  double relevance_scale = 2.5;       // multiplies u.v / sqrt(d) before the sigmoid
  double color_bonus = 1.0;           // added to the relevance logit on a color match
  std::array<StageLink, 3> links{{{6.0, -8.0}, {5.0, -5.0}, {5.0, -5.5}}};
  double poisson_mean = 12.0;         // impressions = 1 + Poisson(mean)
  std::size_t n_ranking_features = 8;
  std::size_t informative_features = 2;  // noisy probes of the relevance logit
  double feature_noise = 1.0;
  bool with_ground_truth = true;
  std::uint64_t seed = 1;

  // Throws ContractError on invalid values.
  void validate() const;
};

// Deterministic per seed, independent of the worker count. Queries are
// generated in fixed-size blocks, each from its own derived seed, and merged
// in block order. Output is grouped by query, candidates in sampling order.
std::vector<EngagementRecord> generate(const FunnelParams& params);

// Keeps records with impressions > threshold.
std::vector<EngagementRecord> filter_min_impressions(std::vector<EngagementRecord> records,
                                                     std::uint32_t threshold = 5);

// Worker cap: MLPR_THREADS if set to a positive integer, else the hardware
// concurrency (at least 1).
std::size_t worker_count();

}  // namespace mlpr::data
