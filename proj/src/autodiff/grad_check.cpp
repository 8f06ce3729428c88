#include "mlpr/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlpr/autodiff/ops.hpp"
#include "mlpr/error.hpp"

namespace mlpr::ad {

namespace {

constexpr double kDropoutRatio = 0.3;
constexpr double kScaleFactor = -1.7;
constexpr double kClampLo = -0.5;
constexpr double kClampHi = 0.6;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Uniform in [lo, hi] with |v - kink| >= gap for every kink.
Tensor away_from(Shape shape, std::mt19937_64& rng, double lo, double hi,
                 std::initializer_list<double> kinks, double gap) {
  Tensor t = random_tensor(std::move(shape), rng, lo, hi);
  for (double& v : t.data()) {
    for (double k : kinks) {
      if (std::abs(v - k) < gap) v = v >= k ? k + gap : k - gap;
    }
  }
  return t;
}

std::size_t arity(OpKind kind) {
  switch (kind) {
    case OpKind::matmul:
    case OpKind::add:
    case OpKind::mul:
    case OpKind::concat:
      return 2;
    case OpKind::batchnorm:
      return 3;
    default:
      return 1;
  }
}

Var apply(OpKind kind, const std::vector<Var>& in, std::uint64_t seed,
          Tensor& bn_mean, Tensor& bn_var) {
  switch (kind) {
    case OpKind::matmul: return matmul(in[0], in[1]);
    case OpKind::add: return add(in[0], in[1]);
    case OpKind::mul: return mul(in[0], in[1]);
    case OpKind::concat: return concat(in);
    case OpKind::relu: return relu(in[0]);
    case OpKind::sigmoid: return sigmoid(in[0]);
    case OpKind::softmax: return softmax(in[0]);
    case OpKind::log: return log(in[0]);
    case OpKind::exp: return exp(in[0]);
    case OpKind::mean: return mean(in[0]);
    case OpKind::scale: return scale(in[0], kScaleFactor);
    case OpKind::clamp: return clamp(in[0], kClampLo, kClampHi);
    case OpKind::slice: return slice_cols(in[0], 1, std::max<std::size_t>(1, in[0].value().cols() - 2));
    case OpKind::sum_last: return sum_last(in[0]);
    case OpKind::batchnorm: {
      bn_mean = Tensor({in[0].value().cols()}, 0.0);
      bn_var = Tensor({in[0].value().cols()}, 1.0);
      return batch_norm(in[0], in[1], in[2], RunningStats{&bn_mean, &bn_var, 0.9, 1e-5});
    }
    case OpKind::dropout: {
      std::mt19937_64 rng(seed);
      return dropout(in[0], kDropoutRatio, rng);
    }
    case OpKind::leaf:
      break;
  }
  throw ContractError("grad_check: op '" + std::string(op_name(kind)) + "' is not checkable");
}

}  // namespace

double grad_check_function(const LossBuilder& build, const std::vector<Tensor>& point,
                           double h, std::optional<OpKind> corrupt_backward) {
  if (!(h > 0.0)) throw ContractError("grad_check: step size must be positive");
  for (const Tensor& t : point) {
    if (!t.all_finite()) throw ContractError("grad_check: sample point is not finite");
  }

  std::vector<Tensor> analytic;
  {
    Graph g(Mode::train);
    if (corrupt_backward) g.inject_backward_fault(*corrupt_backward);
    std::vector<Var> leaves;
    for (const Tensor& t : point) leaves.push_back(g.variable(t));
    Var loss = build(g, leaves);
    g.backward(loss);
    for (const Var& v : leaves) analytic.push_back(g.grad(v));
  }

  auto evaluate = [&](const std::vector<Tensor>& at) {
    Graph g(Mode::train);
    std::vector<Var> leaves;
    for (const Tensor& t : at) leaves.push_back(g.variable(t));
    return build(g, leaves).value().item();
  };

  double worst = 0.0;
  std::vector<Tensor> probe = point;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    for (std::size_t i = 0; i < probe[t].size(); ++i) {
      const double original = probe[t][i];
      probe[t][i] = original + h;
      const double up = evaluate(probe);
      probe[t][i] = original - h;
      const double down = evaluate(probe);
      probe[t][i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[t][i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(OpKind kind, const std::vector<Tensor>& sample_point, double h,
                  const GradCheckOptions& options) {
  if (sample_point.size() != arity(kind)) {
    throw ContractError("grad_check: op '" + std::string(op_name(kind)) + "' takes " +
                        std::to_string(arity(kind)) + " inputs, got " +
                        std::to_string(sample_point.size()));
  }
  // The projection R depends only on the output shape, which is fixed for a
  // given sample point.
  Tensor projection;
  auto build = [&](Graph& g, const std::vector<Var>& leaves) {
    Tensor bn_mean, bn_var;
    Var out = apply(kind, leaves, options.seed, bn_mean, bn_var);
    if (projection.empty()) {
      std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
      projection = random_tensor(out.value().shape(), rng, -1.0, 1.0);
    }
    return mean(mul(out, g.constant(projection)));
  };
  return grad_check_function(build, sample_point, h, options.corrupt_backward);
}

std::vector<Tensor> random_sample_point(OpKind kind, std::mt19937_64& rng) {
  switch (kind) {
    case OpKind::matmul:
      return {random_tensor({2, 3}, rng, -1, 1), random_tensor({3, 2}, rng, -1, 1)};
    case OpKind::add:
    case OpKind::mul:
      // Second operand is a row vector so the broadcast path is exercised.
      return {random_tensor({3, 4}, rng, -1, 1), random_tensor({1, 4}, rng, -1, 1)};
    case OpKind::concat:
      return {random_tensor({3, 2}, rng, -1, 1), random_tensor({3, 3}, rng, -1, 1)};
    case OpKind::relu:
      return {away_from({3, 4}, rng, -2, 2, {0.0}, 0.05)};
    case OpKind::sigmoid:
    case OpKind::softmax:
    case OpKind::exp:
    case OpKind::mean:
    case OpKind::scale:
    case OpKind::sum_last:
    case OpKind::dropout:
      return {random_tensor({3, 4}, rng, -2, 2)};
    case OpKind::slice:
      return {random_tensor({3, 5}, rng, -2, 2)};
    case OpKind::log:
      return {random_tensor({3, 4}, rng, 0.2, 3.0)};
    case OpKind::clamp:
      return {away_from({3, 4}, rng, -1.5, 1.5, {kClampLo, kClampHi}, 0.05)};
    case OpKind::batchnorm:
      return {random_tensor({6, 3}, rng, -2, 2), random_tensor({3}, rng, 0.5, 1.5),
              random_tensor({3}, rng, -0.5, 0.5)};
    case OpKind::leaf:
      break;
  }
  throw ContractError("random_sample_point: op '" + std::string(op_name(kind)) +
                      "' has no sample generator");
}

}  // namespace mlpr::ad
