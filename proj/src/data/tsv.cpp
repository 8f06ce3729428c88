#include "mlpr/data/tsv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "mlpr/error.hpp"

namespace mlpr::data {

namespace {

constexpr std::array<std::string_view, 12> kFixedColumns{
    "query_id",   "item_id",     "query_text", "item_title", "item_type", "item_brand",
    "item_color", "item_gender", "impressions", "clicks",    "atcs",      "purchases"};
constexpr std::array<std::string_view, 3> kTruthColumns{"p_click", "p_atc", "p_purchase"};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) return out;
    start = tab + 1;
  }
}

void check_text(const std::string& field, const char* column) {
  if (field.find_first_of("\t\n\r") != std::string::npos) {
    throw ContractError(std::string("column ") + column + " contains a tab or newline: '" +
                        field + "'");
  }
}

template <class T>
T parse_number(std::string_view text, std::size_t line, std::string_view column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError(line, "bad value '" + std::string(text) + "' in column " +
                               std::string(column));
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw ContractError("cannot format double");
  return std::string(buf.data(), ptr);
}

void write_tsv(std::ostream& out, const std::vector<EngagementRecord>& records) {
  const std::size_t features = records.empty() ? 0 : records.front().ranking_features.size();
  const bool truth = !records.empty() && records.front().truth.has_value();

  std::string header;
  for (auto c : kFixedColumns) {
    if (!header.empty()) header += '\t';
    header += c;
  }
  for (std::size_t f = 0; f < features; ++f) header += "\tf_" + std::to_string(f);
  if (truth) {
    for (auto c : kTruthColumns) (header += '\t') += c;
  }
  out << header << '\n';

  std::string row;
  for (const auto& r : records) {
    if (r.ranking_features.size() != features || r.truth.has_value() != truth) {
      throw ContractError("records disagree on feature count or ground-truth presence (pair " +
                          r.query_id + "/" + r.item_id + ")");
    }
    validate_funnel(r);
    const std::pair<const std::string*, const char*> texts[] = {
        {&r.query_id, "query_id"},     {&r.item_id, "item_id"},       {&r.query_text, "query_text"},
        {&r.item_title, "item_title"}, {&r.item_type, "item_type"},   {&r.item_brand, "item_brand"},
        {&r.item_color, "item_color"}, {&r.item_gender, "item_gender"}};
    row.clear();
    for (const auto& [field, column] : texts) {
      check_text(*field, column);
      if (!row.empty()) row += '\t';
      row += *field;
    }
    for (std::uint32_t n : {r.impressions, r.clicks, r.atcs, r.purchases}) {
      (row += '\t') += std::to_string(n);
    }
    for (double f : r.ranking_features) (row += '\t') += format_double(f);
    if (truth) {
      for (double p : {r.truth->p_click, r.truth->p_atc, r.truth->p_purchase}) {
        (row += '\t') += format_double(p);
      }
    }
    out << row << '\n';
  }
}

void save_tsv(const std::vector<EngagementRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tsv(out, records);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<EngagementRecord> read_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header row");
  const auto header = split_tabs(line);
  if (header.size() < kFixedColumns.size()) {
    throw ParseError(1, "header has " + std::to_string(header.size()) + " columns, expected at least " +
                            std::to_string(kFixedColumns.size()));
  }
  for (std::size_t c = 0; c < kFixedColumns.size(); ++c) {
    if (header[c] != kFixedColumns[c]) {
      throw ParseError(1, "header column " + std::to_string(c + 1) + " is '" +
                              std::string(header[c]) + "', expected '" +
                              std::string(kFixedColumns[c]) + "'");
    }
  }
  std::size_t features = 0;
  while (kFixedColumns.size() + features < header.size() &&
         header[kFixedColumns.size() + features] == "f_" + std::to_string(features)) {
    ++features;
  }
  const std::size_t tail = header.size() - kFixedColumns.size() - features;
  const bool truth = tail == kTruthColumns.size();
  if (tail != 0 && !truth) throw ParseError(1, "unexpected trailing header columns");
  for (std::size_t c = 0; truth && c < kTruthColumns.size(); ++c) {
    if (header[kFixedColumns.size() + features + c] != kTruthColumns[c]) {
      throw ParseError(1, "unexpected ground-truth column '" +
                              std::string(header[kFixedColumns.size() + features + c]) + "'");
    }
  }

  std::vector<EngagementRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cols = split_tabs(line);
    if (cols.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                    std::to_string(cols.size()));
    }
    EngagementRecord r;
    std::string* texts[] = {&r.query_id,   &r.item_id,    &r.query_text, &r.item_title,
                            &r.item_type,  &r.item_brand, &r.item_color, &r.item_gender};
    for (std::size_t c = 0; c < 8; ++c) texts[c]->assign(cols[c]);
    if (r.query_id.empty() || r.item_id.empty()) throw ParseError(line_no, "empty id");
    std::uint32_t* counts[] = {&r.impressions, &r.clicks, &r.atcs, &r.purchases};
    for (std::size_t c = 0; c < 4; ++c) {
      *counts[c] = parse_number<std::uint32_t>(cols[8 + c], line_no, kFixedColumns[8 + c]);
    }
    r.ranking_features.resize(features);
    for (std::size_t f = 0; f < features; ++f) {
      r.ranking_features[f] = parse_number<double>(cols[12 + f], line_no, header[12 + f]);
    }
    if (truth) {
      GroundTruth g;
      double* ps[] = {&g.p_click, &g.p_atc, &g.p_purchase};
      for (std::size_t c = 0; c < 3; ++c) {
        *ps[c] = parse_number<double>(cols[12 + features + c], line_no, kTruthColumns[c]);
        if (!(*ps[c] > 0.0 && *ps[c] < 1.0)) {
          throw ParseError(line_no, "ground-truth probability outside (0, 1)");
        }
      }
      r.truth = g;
    }
    try {
      validate_funnel(r);
    } catch (const ContractError& e) {
      throw ContractError("line " + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<EngagementRecord> load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tsv(in);
}

}  // namespace mlpr::data
