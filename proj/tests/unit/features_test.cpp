#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mlpr/error.hpp"
#include "mlpr/features/embedding.hpp"
#include "mlpr/features/pipeline.hpp"

namespace mlpr::features {
namespace {

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ItemRecord sample_item() {
  return {"i1", "Stairway Bunk Bed", "bed", "bedz king", "gray", "unisex"};
}

TEST(HashEncoderTest, DeterministicForSameText) {
  HashEncoder enc(256, 7);
  const QueryRecord q{"q1", "half bed for kids"};
  EXPECT_EQ(enc.encode_query(q), enc.encode_query(q));
  EXPECT_EQ(HashEncoder(256, 7).encode_item(sample_item()), enc.encode_item(sample_item()));
}

TEST(HashEncoderTest, OutputIsUnitNorm) {
  HashEncoder enc(256, 1);
  for (const char* text : {"a", "red running shoes", "Half  Bed\tFor KIDS"}) {
    const auto v = enc.encode_text(text);
    ASSERT_EQ(v.size(), 256u);
    EXPECT_NEAR(l2(v), 1.0, 1e-9) << text;
  }
}

TEST(HashEncoderTest, CaseAndWhitespaceInsensitive) {
  HashEncoder enc(64, 3);
  EXPECT_EQ(enc.encode_text("Red  Shoes"), enc.encode_text("red shoes"));
}

TEST(HashEncoderTest, ItemsDifferingInColorDiffer) {
  HashEncoder enc(256, 11);
  ItemRecord a = sample_item();
  ItemRecord b = a;
  b.color = "blue";
  EXPECT_NE(enc.encode_item(a), enc.encode_item(b));
}

TEST(HashEncoderTest, EmptyOptionalFieldsKeepDimension) {
  HashEncoder enc(32, 0);
  const ItemRecord only_title{"i2", "lamp", "", "", "", ""};
  const auto v = enc.encode_item(only_title);
  EXPECT_EQ(v.size(), 32u);
  EXPECT_EQ(v, enc.encode_text("lamp [sep] [sep] [sep] [sep]"));
}

TEST(HashEncoderTest, SeedChangesEncoding) {
  EXPECT_NE(HashEncoder(64, 1).encode_text("red shoes"), HashEncoder(64, 2).encode_text("red shoes"));
}

class FileProviderTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / "mlpr_embed_test";
    std::filesystem::create_directories(dir_);
    std::ofstream(dir_ / "q.tsv") << "q1\t0.5\t-0.25\t1\n";
    std::ofstream(dir_ / "i.tsv") << "i1\t0.1\t0.2\t0.3\ni2\t1e-3\t2\t-4\n";
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path dir_;
};

TEST_F(FileProviderTest, ReturnsStoredVector) {
  FileEmbeddingProvider p(dir_ / "q.tsv", dir_ / "i.tsv", 3);
  EXPECT_EQ(p.encode_query({"q1", "whatever"}), (std::vector<double>{0.5, -0.25, 1.0}));
  EXPECT_EQ(p.encode_item({"i2", "t", "", "", "", ""}), (std::vector<double>{1e-3, 2.0, -4.0}));
}

TEST_F(FileProviderTest, MissingIdCarriesId) {
  FileEmbeddingProvider p(dir_ / "q.tsv", dir_ / "i.tsv", 3);
  try {
    p.encode_query({"q404", "x"});
    FAIL();
  } catch (const MissingEmbeddingError& e) {
    EXPECT_EQ(e.id(), "q404");
  }
}

TEST_F(FileProviderTest, WrongWidthIsParseErrorWithLine) {
  std::ofstream(dir_ / "bad.tsv") << "i1\t1\t2\t3\ni2\t1\t2\n";
  try {
    FileEmbeddingProvider p(dir_ / "q.tsv", dir_ / "bad.tsv", 3);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(InteractionsTest, SelfSimilarityIsOne) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(16);
    for (double& x : v) x = dist(rng);
    EXPECT_NEAR(interactions(v, v).cosine, 1.0, 1e-12);
  }
}

TEST(InteractionsTest, AntipodalIsMinusOne) {
  const std::vector<double> q{0.3, -1.2, 2.0};
  const std::vector<double> i{-0.3, 1.2, -2.0};
  EXPECT_NEAR(interactions(q, i).cosine, -1.0, 1e-12);
}

TEST(InteractionsTest, OrthogonalCase) {
  const auto r = interactions(std::vector<double>{1, 0}, std::vector<double>{0, 1});
  EXPECT_EQ(r.cosine, 0.0);
  EXPECT_EQ(r.hadamard, (std::vector<double>{0, 0}));
  EXPECT_EQ(r.concat, (std::vector<double>{1, 0, 0, 1}));
}

TEST(InteractionsTest, ZeroVectorCosineIsZero) {
  EXPECT_EQ(interactions(std::vector<double>{0, 0}, std::vector<double>{1, 2}).cosine, 0.0);
}

TEST(ZScoreTest, PopulationMoments) {
  const std::vector<std::vector<double>> rows{{1, 5}, {2, 5}, {3, 5}};
  const auto stats = zscore_fit(rows);
  EXPECT_DOUBLE_EQ(stats.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(stats.std[0], std::sqrt(2.0 / 3.0));
  EXPECT_EQ(stats.std[1], 0.0);
  EXPECT_EQ(stats.fitted_split, "train");

  EXPECT_NEAR(zscore_apply(stats, rows[0])[0], -std::sqrt(1.5), 1e-12);
  EXPECT_NEAR(zscore_apply(stats, rows[1])[0], 0.0, 1e-12);
  EXPECT_NEAR(zscore_apply(stats, rows[2])[0], std::sqrt(1.5), 1e-12);
  for (const auto& r : rows) EXPECT_EQ(zscore_apply(stats, r)[1], 0.0);
}

// Oracle: textbook two-pass moments over columns, written independently of
// the row-oriented implementation.
TEST(ZScoreTest, MatchesTwoPassRecomputation) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> dist(3.0, 2.0);
  std::vector<std::vector<double>> rows(1000, std::vector<double>(5));
  for (auto& r : rows)
    for (double& x : r) x = dist(rng);
  const auto stats = zscore_fit(rows);
  for (std::size_t c = 0; c < 5; ++c) {
    std::vector<double> col;
    for (const auto& r : rows) col.push_back(r[c]);
    double m = 0.0;
    for (double x : col) m += x;
    m /= static_cast<double>(col.size());
    double v = 0.0;
    for (double x : col) v += (x - m) * (x - m);
    v /= static_cast<double>(col.size());
    EXPECT_NEAR(stats.mean[c], m, 1e-12);
    EXPECT_NEAR(stats.std[c], std::sqrt(v), 1e-12);
  }

  // Normalized training data: mean 0, variance 1.
  std::vector<std::vector<double>> normalized;
  for (const auto& r : rows) normalized.push_back(zscore_apply(stats, r));
  const auto again = zscore_fit(normalized);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_NEAR(again.mean[c], 0.0, 1e-9);
    EXPECT_NEAR(again.std[c] * again.std[c], 1.0, 1e-6);
  }
}

TEST(ZScoreTest, TrainingStatsAreNotRefitOnTest) {
  const auto stats = zscore_fit(std::vector<std::vector<double>>{{0.0}, {2.0}});
  const std::vector<std::vector<double>> test{{5.0}, {7.0}};
  double mean = 0.0;
  for (const auto& r : test) mean += zscore_apply(stats, r)[0] / 2.0;
  EXPECT_NE(mean, 0.0);
}

TEST(ZScoreTest, ErrorsOnBadInput) {
  EXPECT_THROW(zscore_fit(std::vector<std::vector<double>>{{1.0}}), ContractError);
  const auto stats = zscore_fit(std::vector<std::vector<double>>{{0.0, 1.0}, {2.0, 3.0}});
  EXPECT_THROW(zscore_apply(stats, std::vector<double>{1.0}), DimensionError);
}

TEST(AssembleTest, LengthFormula) {
  const std::vector<double> q(4, 0.5), i(4, 0.25), r(3, 1.0);
  const auto fv = assemble(q, i, interactions(q, i), r);
  EXPECT_EQ(fv.values().size(), 24u);
  EXPECT_EQ(fv.layout().total(), 24u);
}

TEST(AssembleTest, ZeroInputsGiveZeroVector) {
  const std::vector<double> q(4, 0.0), i(4, 0.0), r(3, 0.0);
  const auto fv = assemble(q, i, interactions(q, i), r);
  for (double v : fv.values()) EXPECT_EQ(v, 0.0);
}

TEST(AssembleTest, SegmentsRoundTripThroughAccessor) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 10; ++t) {
    std::vector<double> q(6), i(6), r(5);
    for (auto* v : {&q, &i, &r})
      for (double& x : *v) x = dist(rng);
    const auto inter = interactions(q, i);
    const auto fv = assemble(q, i, inter, r);
    auto eq = [](std::span<const double> a, const std::vector<double>& b) {
      return std::vector<double>(a.begin(), a.end()) == b;
    };
    EXPECT_TRUE(eq(fv.segment(Segment::query), q));
    EXPECT_TRUE(eq(fv.segment(Segment::item), i));
    EXPECT_EQ(fv.segment(Segment::cosine)[0], inter.cosine);
    EXPECT_TRUE(eq(fv.segment(Segment::hadamard), inter.hadamard));
    EXPECT_TRUE(eq(fv.segment(Segment::concat), inter.concat));
    EXPECT_TRUE(eq(fv.segment(Segment::ranking), r));

    std::vector<double> direct(fv.layout().total());
    assemble_into(q, i, r, direct);
    EXPECT_EQ(direct, fv.values());
  }
}

TEST(AssembleTest, MismatchNamesSegment) {
  const std::vector<double> q(4, 1.0), i(3, 1.0), r(2, 0.0);
  Interactions inter{0.0, std::vector<double>(4), std::vector<double>(8)};
  try {
    assemble(q, i, inter, r);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("'item'"), std::string::npos);
  }
}

}  // namespace
}  // namespace mlpr::features
