#include "mlpr/model/layers.hpp"

#include <cmath>

#include "mlpr/autodiff/ops.hpp"
#include "mlpr/error.hpp"

namespace mlpr::model {

using ad::Tensor;

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in_dim,
               std::size_t out_dim, bool bias, std::mt19937_64& init_rng)
    : in_dim_(in_dim), out_dim_(out_dim) {
  if (in_dim == 0 || out_dim == 0) {
    throw ContractError("linear layer '" + name + "' needs nonzero dimensions");
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor w({in_dim, out_dim});
  for (double& v : w.data()) v = dist(init_rng);
  weight_ = &store.create(name + "/weight", std::move(w));
  if (bias) bias_ = &store.create(name + "/bias", Tensor({out_dim}, 0.0));
}

Var Linear::forward(Graph& g, Var x) const {
  if (x.value().cols() != in_dim_) {
    throw DimensionError("linear layer '" + weight_->name + "' expects input width " +
                         std::to_string(in_dim_) + ", got " + std::to_string(x.value().cols()));
  }
  Var y = ad::matmul(x, g.parameter(*weight_));
  return bias_ ? ad::add(y, g.parameter(*bias_)) : y;
}

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, std::size_t features,
                     double momentum, double eps)
    : gamma_(&store.create(name + "/gamma", Tensor({features}, 1.0))),
      beta_(&store.create(name + "/beta", Tensor({features}, 0.0))),
      running_mean_(&store.create(name + "/running_mean", Tensor({features}, 0.0), false)),
      running_var_(&store.create(name + "/running_var", Tensor({features}, 1.0), false)),
      momentum_(momentum),
      eps_(eps) {}

Var BatchNorm::forward(Graph& g, Var x) const {
  return ad::batch_norm(x, g.parameter(*gamma_), g.parameter(*beta_),
                        {&running_mean_->value, &running_var_->value, momentum_, eps_});
}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, std::size_t in_dim,
                         const std::vector<std::size_t>& hidden, const Options& options,
                         std::mt19937_64& init_rng)
    : in_dim_(in_dim), out_dim_(in_dim), options_(options) {
  if (hidden.empty()) throw ContractError("feed-forward '" + name + "' needs a hidden layer");
  std::size_t width = in_dim;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string layer = name + "/layer" + std::to_string(l);
    linears_.emplace_back(store, layer, width, hidden[l], true, init_rng);
    if (options.batch_norm) {
      norms_.emplace_back(store, layer + "/bn", hidden[l], options.bn_momentum, options.bn_eps);
    }
    width = hidden[l];
  }
  out_dim_ = width;
}

Var FeedForward::forward(Graph& g, Var x, std::mt19937_64& dropout_rng) const {
  Var h = x;
  for (std::size_t l = 0; l < linears_.size(); ++l) {
    h = linears_[l].forward(g, h);
    if (options_.batch_norm) h = norms_[l].forward(g, h);
    h = ad::relu(h);
    if (options_.dropout > 0.0) h = ad::dropout(h, options_.dropout, dropout_rng);
  }
  return h;
}

Gate::Gate(ParameterStore& store, const std::string& name, std::size_t in_dim, std::size_t experts,
           std::mt19937_64& init_rng)
    : linear_(store, name, in_dim, experts, true, init_rng) {}

Var Gate::forward(Graph& g, Var x) const { return ad::softmax(linear_.forward(g, x)); }

Var mix_experts(Var weights, std::span<const Var> experts) {
  if (experts.empty()) throw ContractError("mix_experts needs at least one expert");
  if (weights.value().cols() != experts.size()) {
    throw DimensionError("gate produces " + std::to_string(weights.value().cols()) +
                         " weights for " + std::to_string(experts.size()) + " experts");
  }
  const ad::Shape shape = experts.front().shape();
  Var out;
  for (std::size_t e = 0; e < experts.size(); ++e) {
    if (experts[e].shape() != shape) {
      throw DimensionError("expert " + std::to_string(e) + " output " +
                           ad::shape_string(experts[e].shape()) + " differs from " +
                           ad::shape_string(shape));
    }
    Var term = ad::mul(ad::slice_cols(weights, e, 1), experts[e]);
    out = e == 0 ? term : ad::add(out, term);
  }
  return out;
}

}  // namespace mlpr::model
