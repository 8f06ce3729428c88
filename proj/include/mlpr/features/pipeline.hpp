#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlpr::features {

struct Interactions {
  double cosine = 0.0;
  std::vector<double> hadamard;  // q[j] * i[j]
  std::vector<double> concat;    // q followed by i
};

// Cosine, Hadamard product, and concatenation of a query and an item
// embedding. A zero vector on either side yields cosine 0 (logged).
Interactions interactions(std::span<const double> query, std::span<const double> item);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
  std::string fitted_split;
};

inline constexpr double kStdFloor = 1e-8;

// Per-column population mean and standard deviation. Needs >= 2 rows.
NormalizationStats zscore_fit(std::span<const std::vector<double>> rows,
                              std::string fitted_split = "train");

// (x - mean) / max(std, 1e-8).
std::vector<double> zscore_apply(const NormalizationStats& stats, std::span<const double> features);

enum class Segment { query, item, cosine, hadamard, concat, ranking };

std::string_view segment_name(Segment segment);

// Fixed layout of the model input:
//   query (dim) | item (dim) | cosine (1) | hadamard (dim) | concat (2 dim) |
//   ranking features (feature_count)
struct FeatureLayout {
  std::size_t dim = 0;
  std::size_t feature_count = 0;

  std::size_t total() const { return 5 * dim + 1 + feature_count; }
  std::size_t offset(Segment segment) const;
  std::size_t length(Segment segment) const;
};

class FeatureVector {
 public:
  FeatureVector(FeatureLayout layout, std::vector<double> values);

  const FeatureLayout& layout() const { return layout_; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> segment(Segment segment) const;

 private:
  FeatureLayout layout_;
  std::vector<double> values_;
};

// Concatenates the segments in layout order. Any length inconsistency throws
// DimensionError naming the offending segment.
FeatureVector assemble(std::span<const double> query, std::span<const double> item,
                       const Interactions& inter, std::span<const double> normalized_ranking);

// Writes the assembled vector straight into `out` (length layout.total()).
void assemble_into(std::span<const double> query, std::span<const double> item,
                   std::span<const double> normalized_ranking, std::span<double> out);

}  // namespace mlpr::features
