#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mlpr/data/record.hpp"

namespace mlpr::data {

struct DatasetSplit {
  std::vector<EngagementRecord> train;
  std::vector<EngagementRecord> validation;
  std::vector<EngagementRecord> test;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
};

struct SplitOptions {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
  // Assign whole queries to one split instead of individual pairs.
  bool query_disjoint = false;
};

// Seeded shuffle, then a contiguous cut with sizes round(f_train n) and
// round(f_val n); the test split takes the rest. With query_disjoint the unit
// of shuffling and cutting is the query (its pairs keep their input order).
// Fewer than 3 records, or fractions that are not positive and summing to 1,
// throw ContractError.
DatasetSplit split(const std::vector<EngagementRecord>& records, const SplitOptions& options = {});

}  // namespace mlpr::data
