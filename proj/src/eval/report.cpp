#include "mlpr/eval/report.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "mlpr/data/tsv.hpp"
#include "mlpr/error.hpp"

namespace mlpr::eval {

namespace {

constexpr const char* kHeader = "model_variant,task,metric,k,value,n_queries,n_skipped";

template <class T>
T parse(const std::string& text, std::size_t line, const char* column) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(line, std::string("bad ") + column + " '" + text + "'");
  }
  return v;
}

}  // namespace

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"' && fields.back().empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quoted field");
  return fields;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.model_variant) << ',' << csv_field(r.task) << ',' << csv_field(r.metric)
        << ',' << (r.k ? std::to_string(*r.k) : "") << ','
        << (r.value ? data::format_double(*r.value) : "NA") << ',' << r.n_queries << ','
        << r.n_skipped << '\n';
  }
}

std::vector<MetricRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw ParseError(1, "metrics header must be '" + std::string(kHeader) + "'");
  }
  std::vector<MetricRow> rows;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    const auto f = parse_csv_line(line, line_no);
    if (f.size() != 7) {
      throw ParseError(line_no, "expected 7 fields, got " + std::to_string(f.size()));
    }
    MetricRow r;
    r.model_variant = f[0];
    r.task = f[1];
    r.metric = f[2];
    if (!f[3].empty()) r.k = parse<std::size_t>(f[3], line_no, "k");
    if (f[4] != "NA") r.value = parse<double>(f[4], line_no, "value");
    r.n_queries = parse<std::size_t>(f[5], line_no, "n_queries");
    r.n_skipped = parse<std::size_t>(f[6], line_no, "n_skipped");
    rows.push_back(std::move(r));
  }
  return rows;
}

void save_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_metrics_csv(out, rows);
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

std::vector<MetricRow> load_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_metrics_csv(in);
}

}  // namespace mlpr::eval
