#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mlpr::eval {

// One row of a metrics report. `k` is empty for metrics without a cutoff;
// an empty `value` is an undefined metric and is written as "NA".
struct MetricRow {
  std::string model_variant;
  std::string task;
  std::string metric;
  std::optional<std::size_t> k;
  std::optional<double> value;
  std::size_t n_queries = 0;
  std::size_t n_skipped = 0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

// CSV with header model_variant,task,metric,k,value,n_queries,n_skipped.
// Fields are quoted when they contain a comma, quote or newline; values use
// the shortest round-trip decimal form.
void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(std::istream& in);

void save_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);
std::vector<MetricRow> load_metrics_csv(const std::filesystem::path& path);

// Generic CSV helpers shared by the other reports.
std::string csv_field(const std::string& text);
std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no);

}  // namespace mlpr::eval
