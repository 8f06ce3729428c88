#include "mlpr/features/embedding.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "mlpr/error.hpp"

namespace mlpr::features {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
constexpr std::size_t kMaxGram = 3;

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ mix64(seed + 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string item_text(const ItemRecord& item) {
  std::string out = item.title;
  for (const std::string* field : {&item.type, &item.brand, &item.color, &item.gender}) {
    out += ' ';
    out += kFieldSeparator;
    out += ' ';
    out += *field;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

HashEncoder::HashEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw ContractError("hash encoder dimension must be positive");
}

std::vector<double> HashEncoder::encode_text(std::string_view text) const {
  std::vector<double> out(dim_, 0.0);
  const std::vector<std::string> tokens = tokenize(text);
  std::string gram;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    gram.clear();
    for (std::size_t n = 1; n <= kMaxGram && start + n <= tokens.size(); ++n) {
      if (n > 1) gram.push_back(' ');
      gram += tokens[start + n - 1];
      const std::uint64_t h = fnv1a(gram, seed_);
      const std::uint64_t bucket = h % dim_;
      const double sign = (mix64(h) >> 63) != 0 ? -1.0 : 1.0;
      out[bucket] += sign;
    }
  }
  double norm = 0.0;
  for (double v : out) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : out) v /= norm;
  }
  return out;
}

std::vector<double> HashEncoder::encode_query(const QueryRecord& query) const {
  return encode_text(query.text);
}

std::vector<double> HashEncoder::encode_item(const ItemRecord& item) const {
  return encode_text(item_text(item));
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& query_file,
                                             const std::filesystem::path& item_file,
                                             std::size_t dim)
    : dim_(dim), queries_(load(query_file, dim)), items_(load(item_file, dim)) {}

FileEmbeddingProvider::Table FileEmbeddingProvider::load(const std::filesystem::path& path,
                                                         std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path.string());
  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != dim + 1) {
      throw ParseError(line_no, path.string() + ": expected " + std::to_string(dim + 1) +
                                    " columns, got " + std::to_string(cols.size()));
    }
    std::vector<double> vec(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string_view cell = cols[j + 1];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), vec[j]);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(line_no, path.string() + ": bad float '" + std::string(cell) + "'");
      }
    }
    table.insert_or_assign(std::string(cols[0]), std::move(vec));
  }
  return table;
}

const std::vector<double>& FileEmbeddingProvider::lookup(const Table& table,
                                                         const std::string& id) const {
  auto it = table.find(id);
  if (it == table.end()) throw MissingEmbeddingError(id);
  return it->second;
}

std::vector<double> FileEmbeddingProvider::encode_query(const QueryRecord& query) const {
  return lookup(queries_, query.query_id);
}

std::vector<double> FileEmbeddingProvider::encode_item(const ItemRecord& item) const {
  return lookup(items_, item.item_id);
}

}  // namespace mlpr::features
