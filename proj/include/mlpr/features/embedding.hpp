#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mlpr::features {

struct QueryRecord {
  std::string query_id;
  std::string text;
};

// Title is required; the remaining fields may be empty.
struct ItemRecord {
  std::string item_id;
  std::string title;
  std::string type;
  std::string brand;
  std::string color;
  std::string gender;
};

inline constexpr std::string_view kFieldSeparator = "[sep]";

// Text of the five item fields joined by the field-separator token.
std::string item_text(const ItemRecord& item);

// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dim() const = 0;
  virtual std::vector<double> encode_query(const QueryRecord& query) const = 0;
  virtual std::vector<double> encode_item(const ItemRecord& item) const = 0;
};

// Training-free encoder: word 1..3-grams hashed into `dim` buckets with a
// sign hash, then L2-normalized. Deterministic for a given (text, seed).
class HashEncoder final : public EmbeddingProvider {
 public:
  explicit HashEncoder(std::size_t dim = 256, std::uint64_t seed = 0);

  std::size_t dim() const override { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<double> encode_text(std::string_view text) const;
  std::vector<double> encode_query(const QueryRecord& query) const override;
  std::vector<double> encode_item(const ItemRecord& item) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Precomputed vectors keyed by query_id / item_id, read from TSV files whose
// rows are `id<TAB>v_1 ... <TAB>v_dim`. Lookups of unknown ids throw
// MissingEmbeddingError.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  FileEmbeddingProvider(const std::filesystem::path& query_file,
                        const std::filesystem::path& item_file, std::size_t dim);

  std::size_t dim() const override { return dim_; }
  std::vector<double> encode_query(const QueryRecord& query) const override;
  std::vector<double> encode_item(const ItemRecord& item) const override;

 private:
  using Table = std::unordered_map<std::string, std::vector<double>>;

  static Table load(const std::filesystem::path& path, std::size_t dim);
  const std::vector<double>& lookup(const Table& table, const std::string& id) const;

  std::size_t dim_;
  Table queries_;
  Table items_;
};

// Stable 64-bit FNV-1a with a seed folded into the offset basis.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0);

}  // namespace mlpr::features
