#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mlpr/autodiff/ops.hpp"
#include "mlpr/error.hpp"
#include "mlpr/model/extraction.hpp"
#include "mlpr/model/mlpr_model.hpp"
#include "mlpr/model/prediction_head.hpp"
#include "mlpr/objective/loss.hpp"

namespace mlpr::model {
namespace {

using ad::Mode;
using ad::Tensor;
using Mat = std::vector<std::vector<double>>;

// ---- Straight-line oracles: plain loops over parameter values, no graph. ----

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

Tensor to_tensor(const Mat& m) {
  Tensor t({m.size(), m.front().size()});
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) t.at(r, c) = m[r][c];
  return t;
}

Mat affine(const Mat& x, const ParameterStore& store, const std::string& name, bool bias = true) {
  const Tensor& w = store.get(name + "/weight").value;
  Mat out(x.size(), std::vector<double>(w.cols(), 0.0));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      double s = bias ? store.get(name + "/bias").value[c] : 0.0;
      for (std::size_t i = 0; i < x[r].size(); ++i) s += x[r][i] * w.at(i, c);
      out[r][c] = s;
    }
  }
  return out;
}

Mat batchnorm_train(const Mat& x, const ParameterStore& store, const std::string& name) {
  const Tensor& gamma = store.get(name + "/gamma").value;
  const Tensor& beta = store.get(name + "/beta").value;
  Mat out = x;
  const double n = static_cast<double>(x.size());
  for (std::size_t c = 0; c < x.front().size(); ++c) {
    double m = 0.0;
    for (const auto& row : x) m += row[c];
    m /= n;
    double v = 0.0;
    for (const auto& row : x) v += (row[c] - m) * (row[c] - m);
    v /= n;
    for (std::size_t r = 0; r < x.size(); ++r) {
      out[r][c] = (x[r][c] - m) / std::sqrt(v + 1e-5) * gamma[c] + beta[c];
    }
  }
  return out;
}

Mat relu(Mat x) {
  for (auto& row : x)
    for (double& v : row) v = v > 0.0 ? v : 0.0;
  return x;
}

Mat expert_oracle(const Mat& x, const ParameterStore& store, const std::string& name,
                  std::size_t layers) {
  Mat h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string layer = name + "/layer" + std::to_string(l);
    h = relu(batchnorm_train(affine(h, store, layer), store, layer + "/bn"));
  }
  return h;
}

Mat softmax_rows(Mat x) {
  for (auto& row : x) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - mx));
    for (double& v : row) v /= z;
  }
  return x;
}

Mat mix_oracle(const Mat& w, const std::vector<Mat>& experts) {
  Mat out(w.size(), std::vector<double>(experts[0][0].size(), 0.0));
  for (std::size_t r = 0; r < w.size(); ++r)
    for (std::size_t e = 0; e < experts.size(); ++e)
      for (std::size_t c = 0; c < out[r].size(); ++c) out[r][c] += w[r][e] * experts[e][r][c];
  return out;
}

Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void expect_near(const Tensor& actual, const Mat& expected, double tol) {
  ASSERT_EQ(actual.rows(), expected.size());
  for (std::size_t r = 0; r < expected.size(); ++r) {
    ASSERT_EQ(actual.cols(), expected[r].size());
    for (std::size_t c = 0; c < expected[r].size(); ++c) {
      EXPECT_NEAR(actual.at(r, c), expected[r][c], tol) << "at (" << r << ", " << c << ")";
    }
  }
}

void expect_rows_sum_to_one(const Tensor& w) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) {
      EXPECT_GE(w.at(r, c), 0.0);
      s += w.at(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

const FeedForward::Options kNoDropout{true, 0.0, 0.9, 1e-5};

// ---- Stage 1 ----

class SharedPoolStageTest : public ::testing::Test {
 protected:
  SharedPoolStageTest() : init_(11), stage_(store_, "s1", 5, 3, 4, {6, 3}, kNoDropout, init_) {}

  ParameterStore store_;
  std::mt19937_64 init_;
  SharedPoolStage stage_;
  std::mt19937_64 dropout_{0};
};

TEST_F(SharedPoolStageTest, MatchesStraightLineRecomputation) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({7, 5}, rng);
  Graph g(Mode::train);
  const auto out = stage_.forward(g, g.constant(x), dropout_);
  ASSERT_EQ(out.per_task.size(), 3u);

  std::vector<Mat> experts;
  for (int e = 0; e < 4; ++e) {
    experts.push_back(expert_oracle(to_mat(x), store_, "s1/expert" + std::to_string(e), 2));
  }
  for (int k = 0; k < 3; ++k) {
    const Mat w = softmax_rows(affine(to_mat(x), store_, "s1/gate" + std::to_string(k)));
    expect_near(out.gate_weights[k].value(), w, 1e-12);
    expect_near(out.per_task[k].value(), mix_oracle(w, experts), 1e-12);
  }
}

TEST_F(SharedPoolStageTest, EachExpertEvaluatedOncePerBatch) {
  std::mt19937_64 rng(2);
  Graph g(Mode::train);
  stage_.forward(g, g.constant(random_tensor({4, 5}, rng)), dropout_);
  std::size_t bn_nodes = 0;
  for (std::size_t i = 0; i < g.size(); ++i) bn_nodes += g.node(i).kind == ad::OpKind::batchnorm;
  EXPECT_EQ(bn_nodes, 4u * 2u);  // 4 experts x 2 layers, shared by all 3 gates
}

TEST_F(SharedPoolStageTest, UniformGateGivesMeanOfExperts) {
  for (int k = 0; k < 3; ++k) {
    store_.get("s1/gate" + std::to_string(k) + "/weight").value.fill(0.0);
    store_.get("s1/gate" + std::to_string(k) + "/bias").value.fill(0.7);
  }
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({5, 5}, rng);
  Graph g(Mode::train);
  const auto out = stage_.forward(g, g.constant(x), dropout_);
  Mat mean(5, std::vector<double>(3, 0.0));
  for (int e = 0; e < 4; ++e) {
    const Mat m = expert_oracle(to_mat(x), store_, "s1/expert" + std::to_string(e), 2);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 3; ++c) mean[r][c] += m[r][c] / 4.0;
  }
  for (const auto& v : out.per_task) expect_near(v.value(), mean, 1e-12);
}

TEST_F(SharedPoolStageTest, OneHotGateSelectsExpertExactly) {
  store_.get("s1/gate1/weight").value.fill(0.0);
  store_.get("s1/gate1/bias").value = Tensor::vector({-1000.0, -1000.0, 1000.0, -1000.0});
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({6, 5}, rng);
  Graph g(Mode::train);
  const auto out = stage_.forward(g, g.constant(x), dropout_);
  Graph g2(Mode::train);
  const Var expert2 = stage_.experts()[2].forward(g2, g2.constant(x), dropout_);
  EXPECT_EQ(out.per_task[1].value(), expert2.value());
}

TEST_F(SharedPoolStageTest, WrongInputWidthIsDimensionError) {
  Graph g(Mode::train);
  EXPECT_THROW(stage_.forward(g, g.constant(Tensor({3, 4})), dropout_), DimensionError);
}

// ---- Stage 2 ----

class SpecificSharedStageTest : public ::testing::Test {
 protected:
  SpecificSharedStageTest()
      : init_(12), stage_(store_, "s2", 3, 3, 2, 2, {4, 3}, kNoDropout, init_) {}

  std::vector<Var> inputs(Graph& g, std::mt19937_64& rng, std::size_t batch = 6) {
    std::vector<Var> out;
    for (int k = 0; k < 3; ++k) out.push_back(g.constant(random_tensor({batch, 3}, rng)));
    return out;
  }

  ParameterStore store_;
  std::mt19937_64 init_;
  SpecificSharedStage stage_;
  std::mt19937_64 dropout_{0};
};

TEST_F(SpecificSharedStageTest, MatchesStraightLineRecomputation) {
  std::mt19937_64 rng(5);
  Graph g(Mode::train);
  const auto in = inputs(g, rng);
  const auto out = stage_.forward(g, in, dropout_);
  for (int k = 0; k < 3; ++k) {
    const Mat x = to_mat(in[k].value());
    std::vector<Mat> pool;
    for (int e = 0; e < 2; ++e)
      pool.push_back(expert_oracle(x, store_, stage_.specific_prefix(k) + std::to_string(e), 2));
    for (int e = 0; e < 2; ++e)
      pool.push_back(expert_oracle(x, store_, stage_.shared_prefix() + std::to_string(e), 2));
    const Mat w = softmax_rows(affine(x, store_, "s2/gate" + std::to_string(k)));
    expect_near(out.per_task[k].value(), mix_oracle(w, pool), 1e-12);
  }
}

TEST_F(SpecificSharedStageTest, OneHotOnSharedExpert) {
  // Selectable order is [specific0, specific1, shared0, shared1].
  store_.get("s2/gate2/weight").value.fill(0.0);
  store_.get("s2/gate2/bias").value = Tensor::vector({-900.0, -900.0, -900.0, 900.0});
  std::mt19937_64 rng(6);
  Graph g(Mode::train);
  const auto in = inputs(g, rng);
  const auto out = stage_.forward(g, in, dropout_);
  Graph g2(Mode::train);
  const Var shared1 = stage_.shared_experts()[1].forward(g2, g2.constant(in[2].value()), dropout_);
  EXPECT_EQ(out.per_task[2].value(), shared1.value());
}

TEST(SpecificSharedStageSingleTask, DegeneratesToPooledGating) {
  ParameterStore store;
  std::mt19937_64 init(13);
  SpecificSharedStage stage(store, "s2", 4, 1, 2, 3, {5}, kNoDropout, init);
  std::mt19937_64 rng(7), dropout(0);
  const Tensor x = random_tensor({5, 4}, rng);
  Graph g(Mode::train);
  const Var in = g.constant(x);
  const auto out = stage.forward(g, std::span<const Var>(&in, 1), dropout);

  // Stage-1 semantics over the pool specific U shared.
  std::vector<Mat> pool;
  for (int e = 0; e < 3; ++e)
    pool.push_back(expert_oracle(to_mat(x), store, stage.specific_prefix(0) + std::to_string(e), 1));
  for (int e = 0; e < 2; ++e)
    pool.push_back(expert_oracle(to_mat(x), store, stage.shared_prefix() + std::to_string(e), 1));
  expect_near(out.per_task[0].value(),
              mix_oracle(softmax_rows(affine(to_mat(x), store, "s2/gate0")), pool), 1e-12);
}

TEST_F(SpecificSharedStageTest, WrongTaskCountIsDimensionError) {
  std::mt19937_64 rng(8);
  Graph g(Mode::train);
  auto in = inputs(g, rng);
  in.pop_back();
  EXPECT_THROW(stage_.forward(g, in, dropout_), DimensionError);
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

// L_j is a generic scalar of v^j alone: mean(v^j * R_j) with random R_j.
TEST_F(SpecificSharedStageTest, SpecificExpertsOnlyReceiveTheirTasksGradient) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    for (std::size_t j = 0; j < 3; ++j) {
      store_.zero_grad();
      Graph g(Mode::train);
      const auto in = inputs(g, rng);
      const auto out = stage_.forward(g, in, dropout_);
      const Var r = g.constant(random_tensor(out.per_task[j].shape(), rng));
      g.backward(ad::mean(ad::mul(out.per_task[j], r)));

      for (auto* p : store_.trainable()) {
        double norm = 0.0;
        for (double v : p->grad.data()) norm += std::abs(v);
        for (std::size_t k = 0; k < 3; ++k) {
          if (k != j && starts_with(p->name, stage_.specific_prefix(k))) {
            EXPECT_EQ(norm, 0.0) << p->name << " from task " << j;
          }
        }
        if (starts_with(p->name, stage_.shared_prefix()) && p->name.find("/weight") != std::string::npos) {
          EXPECT_GT(norm, 0.0) << p->name << " from task " << j;
        }
      }
    }
  }
}

// ---- Towers, attention, heads ----

TEST(TowerTest, ZeroInputZeroWeightsBiasFreeGivesZero) {
  ParameterStore store;
  std::mt19937_64 init(1);
  Tower tower(store, "t", 6, {5}, 4, false, init);
  for (auto* p : store.all()) p->value.fill(0.0);
  Graph g(Mode::eval);
  const Var out = tower.forward(g, g.constant(Tensor({3, 6})));
  EXPECT_EQ(out.value(), Tensor({3, 4}));
}

TEST(TowerTest, OutputDimensionAndOracle) {
  ParameterStore store;
  std::mt19937_64 init(2), rng(3);
  Tower tower(store, "t", 6, {5, 7}, 4, true, init);
  EXPECT_EQ(tower.out_dim(), 4u);
  const Tensor x = random_tensor({3, 6}, rng);
  Graph g(Mode::train);
  const Var out = tower.forward(g, g.constant(x));
  Mat h = to_mat(x);
  for (int l = 0; l < 3; ++l) h = relu(affine(h, store, "t/layer" + std::to_string(l)));
  expect_near(out.value(), h, 1e-12);
}

class AttentionTest : public ::testing::Test {
 protected:
  AttentionTest() : init_(4), unit_(store_, "att", 2, AttentionReadout::position, init_) {}

  ParameterStore store_;
  std::mt19937_64 init_;
  AttentionUnit unit_;
};

TEST_F(AttentionTest, SingletonReturnsValueProjection) {
  std::mt19937_64 rng(5);
  const Tensor t = random_tensor({4, 2}, rng);
  Graph g(Mode::train);
  const auto r = unit_.forward(g, g.constant(t), std::nullopt);
  ASSERT_EQ(r.weights.size(), 1u);
  for (double w : r.weights[0].value().data()) EXPECT_EQ(w, 1.0);
  expect_near(r.output.value(), affine(to_mat(t), store_, "att/wv", false), 1e-15);
}

TEST_F(AttentionTest, IdenticalTokensAttendUniformly) {
  std::mt19937_64 rng(6);
  const Tensor u = random_tensor({3, 2}, rng);
  Graph g(Mode::train);
  const auto r = unit_.forward(g, g.constant(u), g.constant(u));
  for (double w : r.weights[0].value().data()) EXPECT_NEAR(w, 0.5, 1e-15);
  expect_near(r.output.value(), affine(to_mat(u), store_, "att/wv", false), 1e-15);
}

TEST_F(AttentionTest, HandComputedTwoTokenCase) {
  store_.get("att/wq/weight").value = Tensor::matrix(2, 2, {1, 0, 0, 1});
  store_.get("att/wk/weight").value = Tensor::matrix(2, 2, {2, 0, 0, 1});
  store_.get("att/wv/weight").value = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Graph g(Mode::train);
  const auto r = unit_.forward(g, g.constant(Tensor::matrix(1, 2, {1, 0})),
                               g.constant(Tensor::matrix(1, 2, {0, 1})));
  // q = [1, 0]; keys [2, 0] and [0, 1]; scores [2/sqrt2, 0];
  // values [1, 2] and [3, 4].
  const double e = std::exp(2.0 / std::sqrt(2.0));
  const double w1 = e / (e + 1.0), w2 = 1.0 / (e + 1.0);
  EXPECT_NEAR(r.weights[0].value()[0], w1, 1e-12);
  EXPECT_NEAR(r.weights[0].value()[1], w2, 1e-12);
  EXPECT_NEAR(r.output.value()[0], w1 * 1.0 + w2 * 3.0, 1e-12);
  EXPECT_NEAR(r.output.value()[1], w1 * 2.0 + w2 * 4.0, 1e-12);
}

TEST(AttentionMeanReadoutTest, AveragesBothTokenOutputs) {
  ParameterStore store;
  std::mt19937_64 init(7), rng(8);
  AttentionUnit unit(store, "att", 3, AttentionReadout::mean, init);
  const Tensor t = random_tensor({2, 3}, rng), p = random_tensor({2, 3}, rng);
  Graph g(Mode::train);
  const auto r = unit.forward(g, g.constant(t), g.constant(p));
  ASSERT_EQ(r.weights.size(), 2u);
  for (const Var& w : r.weights) expect_rows_sum_to_one(w.value());

  const Mat tm = to_mat(t), pm = to_mat(p);
  const Mat kt = affine(tm, store, "att/wk", false), kp = affine(pm, store, "att/wk", false);
  const Mat vt = affine(tm, store, "att/wv", false), vp = affine(pm, store, "att/wv", false);
  Mat expected(2, std::vector<double>(3, 0.0));
  for (const Mat* token : {&tm, &pm}) {
    const Mat q = affine(*token, store, "att/wq", false);
    for (std::size_t b = 0; b < 2; ++b) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        s1 += q[b][c] * kt[b][c];
        s2 += q[b][c] * kp[b][c];
      }
      const Mat w = softmax_rows({{s1 / std::sqrt(3.0), s2 / std::sqrt(3.0)}});
      for (std::size_t c = 0; c < 3; ++c) {
        expected[b][c] += 0.5 * (w[0][0] * vt[b][c] + w[0][1] * vp[b][c]);
      }
    }
  }
  expect_near(r.output.value(), expected, 1e-12);
}

TEST_F(AttentionTest, TokenShapeMismatchIsDimensionError) {
  Graph g(Mode::train);
  EXPECT_THROW(unit_.forward(g, g.constant(Tensor({2, 2})), g.constant(Tensor({3, 2}))),
               DimensionError);
}

TEST(ProbabilityHeadTest, ZeroParametersGiveHalf) {
  ParameterStore store;
  std::mt19937_64 init(1);
  ProbabilityHead head(store, "h", 4, init);
  for (auto* p : store.all()) p->value.fill(0.0);
  Graph g(Mode::eval);
  for (double p : head.forward(g, g.constant(Tensor({3, 4}, 1.0))).value().data()) {
    EXPECT_EQ(p, 0.5);
  }
}

TEST(ProbabilityHeadTest, SaturatesForLargeLogit) {
  ParameterStore store;
  std::mt19937_64 init(1);
  ProbabilityHead head(store, "h", 1, init);
  store.get("h/weight").value.fill(0.0);
  store.get("h/bias").value.fill(20.0);
  Graph g(Mode::eval);
  EXPECT_GT(head.forward(g, g.constant(Tensor({1, 1}))).value().item(), 0.999999);
}

TEST(ProbabilityHeadTest, MatchesSigmoidOfAffine) {
  ParameterStore store;
  std::mt19937_64 init(2), rng(3);
  ProbabilityHead head(store, "h", 5, init);
  const Tensor a = random_tensor({8, 5}, rng);
  Graph g(Mode::eval);
  const Tensor p = head.forward(g, g.constant(a)).value();
  const Mat z = affine(to_mat(a), store, "h");
  for (std::size_t r = 0; r < 8; ++r) EXPECT_NEAR(p[r], 1.0 / (1.0 + std::exp(-z[r][0])), 1e-15);
}

TEST(ProbabilityTransferTest, Examples) {
  const auto a = probability_transfer(0.5, 0.4, 0.3);
  EXPECT_EQ(a.click, 0.5);
  EXPECT_NEAR(a.atc, 0.2, 1e-15);
  EXPECT_NEAR(a.purchase, 0.06, 1e-15);
  const auto b = probability_transfer(1.0, 1.0, 1.0);
  EXPECT_EQ(b.click, 1.0);
  EXPECT_EQ(b.atc, 1.0);
  EXPECT_EQ(b.purchase, 1.0);
}

TEST(ProbabilityTransferTest, OutOfRangeIsContractError) {
  EXPECT_THROW(probability_transfer(1.2, 0.5, 0.5), ContractError);
  EXPECT_THROW(probability_transfer(0.5, -0.1, 0.5), ContractError);
  EXPECT_THROW(probability_transfer(0.5, 0.5, std::nan("")), ContractError);
}

TEST(ProbabilityTransferTest, MonotoneForRandomInputs) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const auto t = probability_transfer(u(rng), u(rng), u(rng));
    ASSERT_GE(t.click, t.atc);
    ASSERT_GE(t.atc, t.purchase);
  }
}

// ---- Full model ----

ModelConfig tiny_config() {
  ModelConfig c;
  c.expert_hidden = {8, 6};
  c.tower_hidden = {5};
  c.tower_dim = 4;
  c.dropout = 0.2;
  return c;
}

TEST(RankingModelTest, GatesAndAttentionRowsSumToOne) {
  RankingModel model(tiny_config(), 9, 1);
  std::mt19937_64 rng(2), dropout(3);
  Graph g(Mode::train);
  const auto out = model.forward(g, g.constant(random_tensor({16, 9}, rng)), dropout);
  EXPECT_EQ(out.gate_weights.size(), 6u);
  EXPECT_EQ(out.attention_weights.size(), 3u);
  for (const Var& w : out.gate_weights) expect_rows_sum_to_one(w.value());
  for (const Var& w : out.attention_weights) expect_rows_sum_to_one(w.value());
}

TEST(RankingModelTest, TransferredOutputsAreMonotone) {
  std::mt19937_64 rng(4), dropout(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RankingModel model(tiny_config(), 9, seed);
    Graph g(seed % 2 ? Mode::train : Mode::eval);
    const auto out = model.forward(g, g.constant(random_tensor({50, 9}, rng)), dropout);
    for (std::size_t b = 0; b < 50; ++b) {
      const double c = out.predicted[0].value()[b];
      const double a = out.predicted[1].value()[b];
      const double p = out.predicted[2].value()[b];
      ASSERT_GE(c, a);
      ASSERT_GE(a, p);
      EXPECT_EQ(a, c * out.conditional[1].value()[b]);
    }
  }
}

TEST(RankingModelTest, WithoutTransferPredictionIsConditional) {
  ModelConfig c = tiny_config();
  c.probability_transfer = false;
  RankingModel model(c, 9, 1);
  std::mt19937_64 rng(6), dropout(7);
  Graph g(Mode::eval);
  const auto out = model.forward(g, g.constant(random_tensor({4, 9}, rng)), dropout);
  for (std::size_t k = 0; k < kTaskCount; ++k) {
    EXPECT_EQ(out.predicted[k].id(), out.conditional[k].id());
  }
}

double grad_norm(ParameterStore& store, const std::string& prefix) {
  double n = 0.0;
  for (auto* p : store.trainable()) {
    if (p->name.compare(0, prefix.size(), prefix) == 0)
      for (double v : p->grad.data()) n += std::abs(v);
  }
  return n;
}

TEST(RankingModelTest, PurchaseLossReachesClickTowerThroughTransferChain) {
  std::mt19937_64 rng(8), dropout(9);
  for (bool transfer : {true, false}) {
    ModelConfig c = tiny_config();
    c.probability_transfer = transfer;
    RankingModel model(c, 9, 2);
    Graph g(Mode::train);
    const auto out = model.forward(g, g.constant(random_tensor({8, 9}, rng)), dropout);
    Tensor labels({8, 1});
    for (std::size_t i = 0; i < 8; i += 2) labels[i] = 1.0;
    g.backward(objective::bce_loss(out.predicted[2], labels));
    // Live even without transfer, through the a^{k-1} attention chain.
    EXPECT_GT(grad_norm(model.store(), "tower0/"), 0.0) << "transfer=" << transfer;
    EXPECT_GT(grad_norm(model.store(), "tower1/"), 0.0) << "transfer=" << transfer;
  }
}

TEST(RankingModelTest, EarlierTaskLossIgnoresLaterSpecificExperts) {
  RankingModel model(tiny_config(), 9, 3);
  std::mt19937_64 rng(10), dropout(11);
  Graph g(Mode::train);
  const auto out = model.forward(g, g.constant(random_tensor({8, 9}, rng)), dropout);
  Tensor labels({8, 1});
  labels[0] = 1.0;
  g.backward(objective::bce_loss(out.predicted[0], labels));
  EXPECT_EQ(grad_norm(model.store(), "stage2/task1/"), 0.0);
  EXPECT_EQ(grad_norm(model.store(), "stage2/task2/"), 0.0);
  EXPECT_GT(grad_norm(model.store(), "stage2/task0/"), 0.0);
  EXPECT_GT(grad_norm(model.store(), "stage2/shared"), 0.0);
}

TEST(RankingModelTest, SingleTaskModelsShareNoParameters) {
  ModelConfig c = tiny_config();
  c.single_task = true;
  c.uncertainty_loss = c.specific_experts = c.attention_units = c.probability_transfer = false;
  RankingModel model(c, 9, 4);
  std::array<std::size_t, kTaskCount> owned{};
  for (const auto& name : model.store().names()) {
    int owners = 0;
    for (std::size_t k = 0; k < kTaskCount; ++k) {
      if (name.rfind(RankingModel::single_task_prefix(k), 0) == 0) {
        ++owners;
        ++owned[k];
      }
    }
    EXPECT_EQ(owners, 1) << name;
  }
  for (std::size_t n : owned) EXPECT_EQ(n, owned[0]);

  // Task k's loss touches only task k's parameters.
  std::mt19937_64 rng(12), dropout(13);
  Graph g(Mode::train);
  const auto out = model.forward(g, g.constant(random_tensor({6, 9}, rng)), dropout);
  Tensor labels({6, 1});
  labels[1] = 1.0;
  g.backward(objective::bce_loss(out.predicted[1], labels));
  EXPECT_EQ(grad_norm(model.store(), "task0/"), 0.0);
  EXPECT_EQ(grad_norm(model.store(), "task2/"), 0.0);
  EXPECT_GT(grad_norm(model.store(), "task1/"), 0.0);
}

TEST(RankingModelTest, SharedBottomWhenSpecificExpertsOff) {
  ModelConfig c = tiny_config();
  c.specific_experts = false;
  RankingModel model(c, 9, 5);
  EXPECT_EQ(model.stage1(), nullptr);
  EXPECT_EQ(model.stage2(), nullptr);
  EXPECT_TRUE(model.store().contains("bottom/layer0/weight"));
  std::mt19937_64 rng(14), dropout(15);
  Graph g(Mode::train);
  const auto out = model.forward(g, g.constant(random_tensor({4, 9}, rng)), dropout);
  EXPECT_TRUE(out.gate_weights.empty());
}

TEST(RankingModelTest, InvalidConfigurationsAreRejected) {
  ModelConfig c = tiny_config();
  c.single_task = true;
  EXPECT_THROW(RankingModel(c, 9, 1), ContractError);
  c = tiny_config();
  c.stage2_specific = 0;
  EXPECT_THROW(RankingModel(c, 9, 1), ContractError);
  c = tiny_config();
  c.dropout = 1.0;
  EXPECT_THROW(RankingModel(c, 9, 1), ContractError);
}

TEST(RankingModelTest, WrongInputWidthIsDimensionError) {
  RankingModel model(tiny_config(), 9, 1);
  std::mt19937_64 dropout(1);
  Graph g(Mode::eval);
  EXPECT_THROW(model.forward(g, g.constant(Tensor({2, 8})), dropout), DimensionError);
}

TEST(RankingModelTest, SameSeedSameParameters) {
  RankingModel a(tiny_config(), 9, 77), b(tiny_config(), 9, 77);
  const auto pa = a.store().all();
  const auto pb = b.store().all();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(pa[i]->value, pb[i]->value);
  }
}

}  // namespace
}  // namespace mlpr::model
