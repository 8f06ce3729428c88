#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mlpr/autodiff/graph.hpp"
#include "mlpr/autodiff/parameter.hpp"

namespace mlpr::model {

using ad::Graph;
using ad::Parameter;
using ad::ParameterStore;
using ad::Var;

// x W + b with W of shape [in, out]. Glorot-uniform weights, zero bias.
class Linear {
 public:
  Linear(ParameterStore& store, const std::string& name, std::size_t in_dim, std::size_t out_dim,
         bool bias, std::mt19937_64& init_rng);

  Var forward(Graph& g, Var x) const;

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  Parameter& weight() const { return *weight_; }
  Parameter* bias() const { return bias_; }

 private:
  std::size_t in_dim_;
  std::size_t out_dim_;
  Parameter* weight_;
  Parameter* bias_ = nullptr;
};

// Learned scale/shift plus running statistics stored as non-trainable
// buffers (`<name>/running_mean`, `<name>/running_var`).
class BatchNorm {
 public:
  BatchNorm(ParameterStore& store, const std::string& name, std::size_t features, double momentum,
            double eps);

  Var forward(Graph& g, Var x) const;

 private:
  Parameter* gamma_;
  Parameter* beta_;
  Parameter* running_mean_;
  Parameter* running_var_;
  double momentum_;
  double eps_;
};

// Stack of Linear -> [BatchNorm] -> ReLU -> [Dropout] layers.
class FeedForward {
 public:
  struct Options {
    bool batch_norm = true;
    double dropout = 0.0;
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;
  };

  FeedForward(ParameterStore& store, const std::string& name, std::size_t in_dim,
              const std::vector<std::size_t>& hidden, const Options& options,
              std::mt19937_64& init_rng);

  Var forward(Graph& g, Var x, std::mt19937_64& dropout_rng) const;

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::size_t in_dim_;
  std::size_t out_dim_;
  Options options_;
  std::vector<Linear> linears_;
  std::vector<BatchNorm> norms_;
};

// Single affine layer followed by softmax: one weight per selectable expert.
class Gate {
 public:
  Gate(ParameterStore& store, const std::string& name, std::size_t in_dim, std::size_t experts,
       std::mt19937_64& init_rng);

  Var forward(Graph& g, Var x) const;
  const Linear& linear() const { return linear_; }

 private:
  Linear linear_;
};

// sum_e weights[:, e] * experts[e]
Var mix_experts(Var weights, std::span<const Var> experts);

}  // namespace mlpr::model
