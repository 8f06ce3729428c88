#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "mlpr/autodiff/checkpoint.hpp"
#include "mlpr/autodiff/grad_check.hpp"
#include "mlpr/autodiff/graph.hpp"
#include "mlpr/autodiff/ops.hpp"
#include "mlpr/error.hpp"

namespace mlpr::ad {
namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t({r, c});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

TEST(ForwardTest, ReluClampsNegatives) {
  Graph g;
  Var y = relu(g.constant(Tensor::vector({-1, 0, 2})));
  EXPECT_EQ(y.value().storage(), (std::vector<double>{0, 0, 2}));
}

TEST(ForwardTest, SoftmaxOfEqualLogitsIsUniform) {
  Graph g;
  Var y = softmax(g.constant(Tensor::vector({0, 0, 0, 0})));
  for (double v : y.value().data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ForwardTest, SigmoidAtZero) {
  Graph g;
  EXPECT_DOUBLE_EQ(sigmoid(g.constant(Tensor::scalar(0.0))).value().item(), 0.5);
}

TEST(ForwardTest, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g;
    Tensor x = random_matrix(5, 7, rng);
    for (double& v : x.data()) v *= 30.0;
    Var y = softmax(g.constant(x));
    for (std::size_t r = 0; r < 5; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GE(y.value().at(r, c), 0.0);
        total += y.value().at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(ForwardTest, AddBroadcastsRowAndColumn) {
  Graph g;
  Var a = g.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var row = g.constant(Tensor::vector({10, 20, 30}));
  Var col = g.constant(Tensor::matrix(2, 1, {100, 200}));
  EXPECT_EQ(add(a, row).value().storage(), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_EQ(mul(a, col).value().storage(), (std::vector<double>{100, 200, 300, 800, 1000, 1200}));
}

TEST(ForwardTest, ShapeMismatchNamesOpAndShapes) {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
  }
  EXPECT_THROW(add(a, g.constant(Tensor({3, 2}))), DimensionError);
}

TEST(ForwardTest, NonFiniteOutputIsNumericError) {
  Graph g;
  EXPECT_THROW(exp(g.constant(Tensor::scalar(1000.0))), NumericError);
  EXPECT_THROW(log(g.constant(Tensor::scalar(0.0))), NumericError);
}

TEST(BackwardTest, SigmoidSlopeAtZero) {
  Graph g;
  Var x = g.variable(Tensor::scalar(0.0));
  g.backward(sigmoid(x));
  EXPECT_DOUBLE_EQ(g.grad(x).item(), 0.25);
}

TEST(BackwardTest, ReluDeadRegionAndKink) {
  for (double at : {-1.0, 0.0}) {
    Graph g;
    Var x = g.variable(Tensor::scalar(at));
    g.backward(relu(x));
    EXPECT_EQ(g.grad(x).item(), 0.0) << "at " << at;
  }
}

// Independent oracle: central differences of mean(A * B) computed with plain
// loops, no graph involved.
TEST(BackwardTest, MeanOfMatmulMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const Tensor a = random_matrix(3, 4, rng);
  const Tensor b = random_matrix(4, 2, rng);
  auto loss = [](const Tensor& x, const Tensor& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 4; ++k) total += x.at(i, k) * y.at(k, j);
    return total / 6.0;
  };

  Graph g;
  Var va = g.variable(a);
  Var vb = g.variable(b);
  g.backward(mean(matmul(va, vb)));
  const Tensor ga = g.grad(va);
  const Tensor gb = g.grad(vb);

  const double h = 1e-5;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Tensor up = a, down = a;
    up[i] += h;
    down[i] -= h;
    const double numeric = (loss(up, b) - loss(down, b)) / (2 * h);
    EXPECT_LE(std::abs(ga[i] - numeric) / std::max(1e-12, std::abs(numeric)), 1e-4);
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    Tensor up = b, down = b;
    up[i] += h;
    down[i] -= h;
    const double numeric = (loss(a, up) - loss(a, down)) / (2 * h);
    EXPECT_LE(std::abs(gb[i] - numeric) / std::max(1e-12, std::abs(numeric)), 1e-4);
  }
}

TEST(BackwardTest, NonScalarLossIsContractError) {
  Graph g;
  Var x = g.variable(Tensor({2, 2}, 1.0));
  EXPECT_THROW(g.backward(relu(x)), ContractError);
}

TEST(BackwardTest, UnreachableGradientsAreZero) {
  ParameterStore store;
  Parameter& used = store.create("used", Tensor::vector({1.0, 2.0}));
  Parameter& unused = store.create("unused", Tensor::vector({3.0}));
  Graph g;
  Var u = g.parameter(used);
  g.parameter(unused);
  g.backward(mean(u));
  EXPECT_EQ(used.grad.storage(), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(unused.grad.storage(), (std::vector<double>{0.0}));
}

TEST(BackwardTest, ParameterUsedTwiceAccumulates) {
  ParameterStore store;
  Parameter& p = store.create("p", Tensor::scalar(3.0));
  Graph g;
  Var a = g.parameter(p);
  Var b = g.parameter(p);
  EXPECT_EQ(a.id(), b.id());
  g.backward(mul(a, b));
  EXPECT_DOUBLE_EQ(p.grad.item(), 6.0);
}

TEST(BackwardTest, BackwardLeavesForwardValuesUntouched) {
  std::mt19937_64 rng(5);
  Graph g;
  Var x = g.variable(random_matrix(4, 3, rng));
  Var w = g.variable(random_matrix(3, 3, rng));
  Var y = softmax(relu(matmul(x, w)));
  Var loss = mean(log(clamp(y, 1e-12, 1.0)));
  std::vector<Tensor> before;
  for (std::size_t i = 0; i < g.size(); ++i) before.push_back(g.node(i).value);
  g.backward(loss);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.node(i).value, before[i]);
}

TEST(BackwardTest, DeterministicReplayIsBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(99);
    Graph g;
    Var x = g.variable(random_matrix(6, 4, rng));
    Tensor gm({4}, 1.0), bt({4}, 0.0), rm({4}, 0.0), rv({4}, 1.0);
    Var y = batch_norm(x, g.variable(gm), g.variable(bt), RunningStats{&rm, &rv});
    y = dropout(relu(y), 0.2, rng);
    Var loss = mean(sigmoid(y));
    g.backward(loss);
    return std::make_pair(loss.value(), g.grad(x));
  };
  const auto first = run();
  const auto second = run();
  EXPECT_EQ(first.first, second.first);
  EXPECT_EQ(first.second, second.second);
}

TEST(GradCheckTest, SigmoidAtPointThree) {
  EXPECT_LT(grad_check(OpKind::sigmoid, {Tensor::scalar(0.3)}, 1e-5), 1e-6);
}

TEST(GradCheckTest, MatmulRandom) {
  std::mt19937_64 rng(1);
  EXPECT_LT(grad_check(OpKind::matmul, {random_matrix(2, 3, rng), random_matrix(3, 2, rng)}, 1e-5),
            1e-4);
}

TEST(GradCheckTest, SoftmaxOneTwoThree) {
  EXPECT_LT(grad_check(OpKind::softmax, {Tensor::vector({1, 2, 3})}, 1e-5), 1e-4);
}

TEST(GradCheckTest, EveryOpAtTenRandomPoints) {
  std::mt19937_64 rng(2024);
  for (OpKind kind : differentiable_ops()) {
    for (int trial = 0; trial < 10; ++trial) {
      const double err = grad_check(kind, random_sample_point(kind, rng), 1e-5);
      EXPECT_LT(err, 1e-4) << op_name(kind) << " trial " << trial;
    }
  }
}

TEST(GradCheckTest, DetectsCorruptedBackward) {
  std::mt19937_64 rng(8);
  const auto point = random_sample_point(OpKind::sigmoid, rng);
  GradCheckOptions opts;
  opts.corrupt_backward = OpKind::sigmoid;
  EXPECT_GT(grad_check(OpKind::sigmoid, point, 1e-5, opts), 1e-3);
}

TEST(GradCheckTest, RejectsNonPositiveStep) {
  EXPECT_THROW(grad_check(OpKind::relu, {Tensor::scalar(1.0)}, 0.0), ContractError);
}

class BatchNormTest : public ::testing::Test {
 protected:
  Var run(Graph& g, const Tensor& x) {
    gamma_ = Tensor({x.cols()}, 1.0);
    beta_ = Tensor({x.cols()}, 0.0);
    return batch_norm(g.constant(x), g.constant(gamma_), g.constant(beta_),
                      RunningStats{&mean_, &var_, 0.9, 1e-5});
  }

  void reset(std::size_t features) {
    mean_ = Tensor({features}, 0.0);
    var_ = Tensor({features}, 1.0);
  }

  Tensor gamma_, beta_, mean_, var_;
};

TEST_F(BatchNormTest, ConstantColumnNormalizesToZero) {
  reset(1);
  Graph g;
  Var y = run(g, Tensor::matrix(4, 1, {5, 5, 5, 5}));
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST_F(BatchNormTest, UnitVariancePair) {
  reset(1);
  Graph g;
  Var y = run(g, Tensor::matrix(2, 1, {-1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], -1.0 / std::sqrt(1.0 + 1e-5));
  EXPECT_DOUBLE_EQ(y.value()[1], 1.0 / std::sqrt(1.0 + 1e-5));
}

// The normalized variance of a column is s2 / (s2 + eps), so inputs are
// spread wide enough (s2 >= 10) for it to sit within 1e-6 of 1.
TEST_F(BatchNormTest, RandomBatchHasStandardMoments) {
  std::mt19937_64 rng(4);
  reset(4);
  Tensor x = random_matrix(8, 4, rng);
  for (double& v : x.data()) v = 10.0 * v + 2.0;
  Graph g;
  Var y = run(g, x);
  for (std::size_t c = 0; c < 4; ++c) {
    double in_mean = 0.0, in_var = 0.0;
    for (std::size_t r = 0; r < 8; ++r) in_mean += x.at(r, c) / 8.0;
    for (std::size_t r = 0; r < 8; ++r) in_var += (x.at(r, c) - in_mean) * (x.at(r, c) - in_mean) / 8.0;

    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < 8; ++r) m += y.value().at(r, c);
    m /= 8.0;
    for (std::size_t r = 0; r < 8; ++r) v += (y.value().at(r, c) - m) * (y.value().at(r, c) - m);
    v /= 8.0;
    EXPECT_NEAR(m, 0.0, 1e-10);
    EXPECT_NEAR(v, in_var / (in_var + 1e-5), 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST_F(BatchNormTest, RunningStatsUseMomentum) {
  reset(1);
  Graph g;
  run(g, Tensor::matrix(2, 1, {1, 3}));
  EXPECT_DOUBLE_EQ(mean_[0], 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(var_[0], 0.9 * 1.0 + 0.1 * 1.0);
}

TEST_F(BatchNormTest, EvalModeUsesRunningStats) {
  reset(1);
  mean_[0] = 2.0;
  var_[0] = 4.0 - 1e-5;
  Graph g(Mode::eval);
  Var y = run(g, Tensor::matrix(1, 1, {6.0}));
  EXPECT_NEAR(y.value().item(), 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(mean_[0], 2.0);
}

TEST_F(BatchNormTest, SingleRowTrainBatchIsContractError) {
  reset(2);
  Graph g;
  EXPECT_THROW(run(g, Tensor::matrix(1, 2, {1, 2})), ContractError);
}

TEST(DropoutTest, ZeroRatioIsIdentity) {
  std::mt19937_64 rng(1);
  for (Mode mode : {Mode::train, Mode::eval}) {
    Graph g(mode);
    Tensor x = random_matrix(3, 3, rng);
    EXPECT_EQ(dropout(g.constant(x), 0.0, rng).value(), x);
  }
}

TEST(DropoutTest, EvalModeIsIdentity) {
  std::mt19937_64 rng(1);
  Graph g(Mode::eval);
  Tensor x = random_matrix(3, 3, rng);
  EXPECT_EQ(dropout(g.constant(x), 0.2, rng).value(), x);
}

TEST(DropoutTest, SurvivorFractionAndScale) {
  std::mt19937_64 rng(12345);
  Graph g;
  Var y = dropout(g.constant(Tensor({100000}, 1.0)), 0.5, rng);
  std::size_t survivors = 0;
  for (double v : y.value().data()) {
    if (v != 0.0) {
      ++survivors;
      EXPECT_EQ(v, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(survivors) / 1e5, 0.5, 0.01);
}

TEST(DropoutTest, RatioOneIsContractError) {
  std::mt19937_64 rng(1);
  Graph g;
  EXPECT_THROW(dropout(g.constant(Tensor({2}, 1.0)), 1.0, rng), ContractError);
}

TEST(CheckpointTest, HeaderLayout) {
  const auto bytes = encode_checkpoint({{"w", Tensor::matrix(1, 2, {1.0, -2.5})}});
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MLPR");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 1);  // tensor count
  EXPECT_EQ(bytes[12], 1);  // name length u16
  EXPECT_EQ(bytes[14], 'w');
  EXPECT_EQ(bytes[15], 2);  // rank
  // 4 + 4 + 4 + 2 + 1 + 1 + 2 * 8 + 2 * 8
  EXPECT_EQ(bytes.size(), 48u);
}

TEST(CheckpointTest, RandomRoundTripIsBitExact) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NamedTensor> tensors;
    for (int i = 0; i < 4; ++i) {
      Shape shape(static_cast<std::size_t>(dim(rng) % 3 + 1));
      for (auto& d : shape) d = static_cast<std::size_t>(dim(rng));
      Tensor t(shape);
      for (double& v : t.data()) v = std::bit_cast<double>(rng() & 0x7fefffffffffffffULL);
      tensors.push_back({"t" + std::to_string(trial) + "/" + std::to_string(i), t});
    }
    tensors.front().tensor[0] = -0.0;
    const auto decoded = decode_checkpoint(encode_checkpoint(tensors));
    ASSERT_EQ(decoded.size(), tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      EXPECT_EQ(decoded[i].name, tensors[i].name);
      ASSERT_EQ(decoded[i].tensor.shape(), tensors[i].tensor.shape());
      EXPECT_EQ(std::memcmp(decoded[i].tensor.data().data(), tensors[i].tensor.data().data(),
                            tensors[i].tensor.size() * sizeof(double)),
                0);
    }
  }
}

TEST(CheckpointTest, FileRoundTripRestoresStore) {
  ParameterStore a;
  a.create("x", Tensor::vector({1.5, 2.5}));
  a.create("bn/mean", Tensor::vector({0.1}), false);
  const auto path = std::filesystem::temp_directory_path() / "mlpr_ckpt_test.bin";
  save_checkpoint(path, snapshot(a));

  ParameterStore b;
  b.create("x", Tensor::vector({0.0, 0.0}));
  b.create("bn/mean", Tensor::vector({0.0}), false);
  EXPECT_TRUE(restore(b, load_checkpoint(path)).empty());
  EXPECT_EQ(b.get("x").value, a.get("x").value);
  EXPECT_EQ(b.get("bn/mean").value, a.get("bn/mean").value);
  std::filesystem::remove(path);
}

TEST(CheckpointTest, TruncatedOrBadMagicIsParseError) {
  auto bytes = encode_checkpoint({{"w", Tensor::scalar(1.0)}});
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), ParseError);
  bytes[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bytes), ParseError);
}

}  // namespace
}  // namespace mlpr::ad
