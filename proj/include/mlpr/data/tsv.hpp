#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlpr/data/record.hpp"

namespace mlpr::data {

// Dataset TSV: a header row, then one record per line. Columns:
//   query_id item_id query_text item_title item_type item_brand item_color
//   item_gender impressions clicks atcs purchases f_0 .. f_{F-1}
//   [p_click p_atc p_purchase]
// Doubles use the shortest representation that parses back to the same bits.
// All records in one file must agree on F and on ground-truth presence.
void write_tsv(std::ostream& out, const std::vector<EngagementRecord>& records);
void save_tsv(const std::vector<EngagementRecord>& records, const std::filesystem::path& path);

// Malformed rows throw ParseError carrying the 1-based line number; funnel
// violations throw ContractError naming the line.
std::vector<EngagementRecord> read_tsv(std::istream& in);
std::vector<EngagementRecord> load_tsv(const std::filesystem::path& path);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace mlpr::data
