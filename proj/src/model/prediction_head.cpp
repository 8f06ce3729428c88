#include "mlpr/model/prediction_head.hpp"

#include <cmath>

#include "mlpr/autodiff/ops.hpp"
#include "mlpr/error.hpp"

namespace mlpr::model {

Tower::Tower(ParameterStore& store, const std::string& name, std::size_t in_dim,
             const std::vector<std::size_t>& hidden, std::size_t out_dim, bool bias,
             std::mt19937_64& init_rng) {
  std::size_t width = in_dim;
  std::size_t l = 0;
  for (std::size_t h : hidden) {
    layers_.emplace_back(store, name + "/layer" + std::to_string(l++), width, h, bias, init_rng);
    width = h;
  }
  layers_.emplace_back(store, name + "/layer" + std::to_string(l), width, out_dim, bias, init_rng);
}

Var Tower::forward(Graph& g, Var v) const {
  Var h = v;
  for (const auto& layer : layers_) h = ad::relu(layer.forward(g, h));
  return h;
}

AttentionUnit::AttentionUnit(ParameterStore& store, const std::string& name, std::size_t dim,
                             AttentionReadout readout, std::mt19937_64& init_rng)
    : wq_(store, name + "/wq", dim, dim, false, init_rng),
      wk_(store, name + "/wk", dim, dim, false, init_rng),
      wv_(store, name + "/wv", dim, dim, false, init_rng),
      dim_(dim),
      readout_(readout) {}

AttentionUnit::Result AttentionUnit::forward(Graph& g, Var current,
                                             std::optional<Var> previous) const {
  std::vector<Var> tokens{current};
  if (previous) {
    if (previous->shape() != current.shape()) {
      throw DimensionError("attention tokens differ in shape: " +
                           ad::shape_string(current.shape()) + " vs " +
                           ad::shape_string(previous->shape()));
    }
    tokens.push_back(*previous);
  }
  std::vector<Var> keys, values;
  for (Var t : tokens) {
    keys.push_back(wk_.forward(g, t));
    values.push_back(wv_.forward(g, t));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim_));

  auto attend = [&](Var token, Result& result) {
    Var q = wq_.forward(g, token);
    std::vector<Var> scores;
    for (Var k : keys) scores.push_back(ad::scale(ad::sum_last(ad::mul(q, k)), inv_sqrt_d));
    Var w = ad::softmax(ad::concat(scores));
    result.weights.push_back(w);
    std::vector<Var> vs(values.begin(), values.end());
    return mix_experts(w, vs);
  };

  Result result;
  result.output = attend(tokens[0], result);
  if (readout_ == AttentionReadout::mean && tokens.size() > 1) {
    Var second = attend(tokens[1], result);
    result.output = ad::scale(ad::add(result.output, second), 0.5);
  }
  return result;
}

ProbabilityHead::ProbabilityHead(ParameterStore& store, const std::string& name,
                                 std::size_t in_dim, std::mt19937_64& init_rng)
    : linear_(store, name, in_dim, 1, true, init_rng) {}

Var ProbabilityHead::forward(Graph& g, Var a) const { return ad::sigmoid(linear_.forward(g, a)); }

std::array<Var, kTaskCount> probability_transfer(const std::array<Var, kTaskCount>& conditional) {
  std::array<Var, kTaskCount> out;
  out[0] = conditional[0];
  for (std::size_t k = 1; k < kTaskCount; ++k) out[k] = ad::mul(out[k - 1], conditional[k]);
  return out;
}

TransferredOutputs probability_transfer(double p_click, double p_atc, double p_purchase) {
  for (double p : {p_click, p_atc, p_purchase}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ContractError("probability_transfer input " + std::to_string(p) +
                          " is outside [0, 1]");
    }
  }
  const double atc = p_click * p_atc;
  return {p_click, atc, atc * p_purchase};
}

}  // namespace mlpr::model
