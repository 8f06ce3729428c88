#include "mlpr/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "mlpr/error.hpp"

namespace mlpr::data {

namespace {

// Sizes of the first two parts of a contiguous cut of n units.
std::array<std::size_t, 2> cut_sizes(std::size_t n, const std::array<double, 3>& f) {
  const double dn = static_cast<double>(n);
  auto train = static_cast<std::size_t>(std::llround(f[0] * dn));
  auto val = static_cast<std::size_t>(std::llround(f[1] * dn));
  train = std::min(train, n);
  val = std::min(val, n - train);
  return {train, val};
}

void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
}

}  // namespace

DatasetSplit split(const std::vector<EngagementRecord>& records, const SplitOptions& options) {
  if (records.size() < 3) {
    throw ContractError("split needs at least 3 records, got " + std::to_string(records.size()));
  }
  const auto& f = options.fractions;
  if (!(f[0] > 0.0 && f[1] > 0.0 && f[2] > 0.0) || std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw ContractError("split fractions must be positive and sum to 1");
  }

  DatasetSplit out;
  out.fractions = f;
  std::array<std::vector<EngagementRecord>*, 3> parts{&out.train, &out.validation, &out.test};

  if (!options.query_disjoint) {
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    shuffle_indices(idx, options.seed);
    const auto [n_train, n_val] = cut_sizes(idx.size(), f);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int part = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
      parts[part]->push_back(records[idx[i]]);
    }
    return out;
  }

  // Queries in order of first appearance, so the result does not depend on
  // id ordering.
  std::map<std::string, std::size_t> query_index;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, fresh] = query_index.try_emplace(records[i].query_id, members.size());
    if (fresh) members.emplace_back();
    members[it->second].push_back(i);
  }
  if (members.size() < 3) {
    throw ContractError("query-disjoint split needs at least 3 queries");
  }
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_indices(order, options.seed);
  const auto [q_train, q_val] = cut_sizes(order.size(), f);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int part = i < q_train ? 0 : (i < q_train + q_val ? 1 : 2);
    for (std::size_t r : members[order[i]]) parts[part]->push_back(records[r]);
  }
  return out;
}

}  // namespace mlpr::data
