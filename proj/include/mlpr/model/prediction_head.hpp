#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mlpr/model/config.hpp"
#include "mlpr/model/layers.hpp"

namespace mlpr::model {

// Per-task MLP: Linear + ReLU for every hidden width, then Linear + ReLU to
// the tower dimension.
class Tower {
 public:
  Tower(ParameterStore& store, const std::string& name, std::size_t in_dim,
        const std::vector<std::size_t>& hidden, std::size_t out_dim, bool bias,
        std::mt19937_64& init_rng);

  Var forward(Graph& g, Var v) const;

  std::size_t out_dim() const { return layers_.back().out_dim(); }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

// Single-head scaled dot-product attention over [t^k] or [t^k, a^{k-1}],
// each token projected by bias-free W_Q, W_K, W_V with d_k = token dim.
class AttentionUnit {
 public:
  struct Result {
    Var output;                // a^k, [B, d]
    std::vector<Var> weights;  // softmax rows actually computed, each [B, tokens]
  };

  AttentionUnit(ParameterStore& store, const std::string& name, std::size_t dim,
                AttentionReadout readout, std::mt19937_64& init_rng);

  Result forward(Graph& g, Var current, std::optional<Var> previous) const;

  const Linear& query() const { return wq_; }
  const Linear& key() const { return wk_; }
  const Linear& value() const { return wv_; }

 private:
  Linear wq_;
  Linear wk_;
  Linear wv_;
  std::size_t dim_;
  AttentionReadout readout_;
};

// sigmoid(a W + b) with a single output unit.
class ProbabilityHead {
 public:
  ProbabilityHead(ParameterStore& store, const std::string& name, std::size_t in_dim,
                  std::mt19937_64& init_rng);

  Var forward(Graph& g, Var a) const;
  const Linear& linear() const { return linear_; }

 private:
  Linear linear_;
};

// Funnel chaining of conditional stage probabilities into unconditional ones:
// click = p1, atc = p1 p2, purchase = p1 p2 p3.
std::array<Var, kTaskCount> probability_transfer(const std::array<Var, kTaskCount>& conditional);

struct TransferredOutputs {
  double click = 0.0;
  double atc = 0.0;
  double purchase = 0.0;
};

// Scalar form. Inputs outside [0, 1] are a ContractError.
TransferredOutputs probability_transfer(double p_click, double p_atc, double p_purchase);

}  // namespace mlpr::model
