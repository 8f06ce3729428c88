#include "mlpr/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "backward_rules.hpp"
#include "mlpr/error.hpp"

namespace mlpr::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

Graph& graph_of(Var v) {
  if (!v.valid()) throw ContractError("operation on an unbound Var");
  return *v.graph();
}

Graph& common_graph(Var a, Var b) {
  Graph& g = graph_of(a);
  if (b.graph() != &g) throw ContractError("operands belong to different graphs");
  return g;
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError("op '" + std::string(op) + "': incompatible shapes " +
                       shape_string(a) + " and " + shape_string(b));
}

Tensor& grad_buffer(Node& n) {
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

// Broadcast geometry for a binary elementwise op over matrix views.
struct Broadcast {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Shape out_shape;
};

Broadcast broadcast(std::string_view op, const Tensor& a, const Tensor& b) {
  const std::size_t ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  Broadcast bc;
  bc.rows = std::max(ra, rb);
  bc.cols = std::max(ca, cb);
  if ((ra != bc.rows && ra != 1) || (rb != bc.rows && rb != 1) ||
      (ca != bc.cols && ca != 1) || (cb != bc.cols && cb != 1)) {
    shape_error(op, a.shape(), b.shape());
  }
  if (a.rank() == 2 || b.rank() == 2) {
    bc.out_shape = {bc.rows, bc.cols};
  } else {
    bc.out_shape = {bc.cols};
  }
  return bc;
}

// Adds `g` (output-shaped) into the gradient of an input of shape `in`,
// summing over broadcast dimensions. `factor` (output-shaped or empty)
// multiplies g elementwise; `factor_src` selects the other operand.
void reduce_into(Tensor& dst, const Tensor& g, std::size_t rows, std::size_t cols,
                 const Tensor* other) {
  const std::size_t dr = dst.rows(), dc = dst.cols();
  const std::size_t orr = other ? other->rows() : 0, oc = other ? other->cols() : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double v = g[r * cols + c];
      if (other) v *= (*other)[(orr == 1 ? 0 : r) * oc + (oc == 1 ? 0 : c)];
      dst[(dr == 1 ? 0 : r) * dc + (dc == 1 ? 0 : c)] += v;
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Var unary(Var x, OpKind kind, F&& f) {
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  Node n;
  n.kind = kind;
  n.inputs = {x.id()};
  n.value = Tensor(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) n.value[i] = f(in[i]);
  return g.record(std::move(n));
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = common_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (tb.rank() != 2 || ta.cols() != tb.rows()) shape_error("matmul", ta.shape(), tb.shape());
  const std::size_t m = ta.rows(), k = ta.cols(), n_cols = tb.cols();
  Node n;
  n.kind = OpKind::matmul;
  n.inputs = {a.id(), b.id()};
  n.value = Tensor({m, n_cols});
  MutMap out(n.value.data().data(), m, n_cols);
  out.noalias() = ConstMap(ta.data().data(), m, k) * ConstMap(tb.data().data(), k, n_cols);
  return g.record(std::move(n));
}

Var add(Var a, Var b) {
  Graph& g = common_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  const Broadcast bc = broadcast("add", ta, tb);
  Node n;
  n.kind = OpKind::add;
  n.inputs = {a.id(), b.id()};
  n.value = Tensor(bc.out_shape);
  const std::size_t ca = ta.cols(), cb = tb.cols();
  const bool a_row = ta.rows() == 1, b_row = tb.rows() == 1;
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      n.value[r * bc.cols + c] = ta[(a_row ? 0 : r) * ca + (ca == 1 ? 0 : c)] +
                                 tb[(b_row ? 0 : r) * cb + (cb == 1 ? 0 : c)];
    }
  }
  return g.record(std::move(n));
}

Var mul(Var a, Var b) {
  Graph& g = common_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  const Broadcast bc = broadcast("mul", ta, tb);
  Node n;
  n.kind = OpKind::mul;
  n.inputs = {a.id(), b.id()};
  n.value = Tensor(bc.out_shape);
  const std::size_t ca = ta.cols(), cb = tb.cols();
  const bool a_row = ta.rows() == 1, b_row = tb.rows() == 1;
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      n.value[r * bc.cols + c] = ta[(a_row ? 0 : r) * ca + (ca == 1 ? 0 : c)] *
                                 tb[(b_row ? 0 : r) * cb + (cb == 1 ? 0 : c)];
    }
  }
  return g.record(std::move(n));
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Graph& g = graph_of(parts.front());
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  bool any_matrix = false;
  Node n;
  n.kind = OpKind::concat;
  for (const Var& p : parts) {
    if (p.graph() != &g) throw ContractError("concat operands belong to different graphs");
    const Tensor& t = p.value();
    if (t.rows() != rows) shape_error("concat", parts.front().shape(), t.shape());
    any_matrix = any_matrix || t.rank() == 2;
    cols += t.cols();
    n.inputs.push_back(p.id());
  }
  n.value = any_matrix ? Tensor({rows, cols}) : Tensor({cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    const std::size_t pc = t.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(t.data().begin() + r * pc, pc, n.value.data().begin() + r * cols + offset);
    }
    offset += pc;
  }
  return g.record(std::move(n));
}

Var relu(Var x) {
  // Subgradient at exactly 0 is 0.
  return unary(x, OpKind::relu, [](double v) { return v > 0.0 ? v : 0.0; });
}

Var sigmoid(Var x) { return unary(x, OpKind::sigmoid, stable_sigmoid); }

Var log(Var x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw NumericError("op 'log': non-positive input " + std::to_string(v));
  }
  return unary(x, OpKind::log, [](double v) { return std::log(v); });
}

Var exp(Var x) { return unary(x, OpKind::exp, [](double v) { return std::exp(v); }); }

Var scale(Var x, double factor) {
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  Node n;
  n.kind = OpKind::scale;
  n.inputs = {x.id()};
  n.alpha = factor;
  n.value = Tensor(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) n.value[i] = in[i] * factor;
  return g.record(std::move(n));
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  Node n;
  n.kind = OpKind::clamp;
  n.inputs = {x.id()};
  n.alpha = lo;
  n.beta = hi;
  n.value = Tensor(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) n.value[i] = std::clamp(in[i], lo, hi);
  return g.record(std::move(n));
}

Var softmax(Var x) {
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  const std::size_t rows = in.rows(), cols = in.cols();
  if (cols == 0) throw DimensionError("op 'softmax': empty last axis");
  Node n;
  n.kind = OpKind::softmax;
  n.inputs = {x.id()};
  n.value = Tensor(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data().data() + r * cols;
    double* out = n.value.data().data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = std::exp(row[c] - mx);
      total += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
  }
  return g.record(std::move(n));
}

Var mean(Var x) {
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  if (in.size() == 0) throw DimensionError("op 'mean': empty tensor");
  Node n;
  n.kind = OpKind::mean;
  n.inputs = {x.id()};
  double total = 0.0;
  for (double v : in.data()) total += v;
  n.value = Tensor::scalar(total / static_cast<double>(in.size()));
  return g.record(std::move(n));
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  const std::size_t rows = in.rows(), cols = in.cols();
  if (count == 0 || start + count > cols) {
    throw DimensionError("op 'slice': columns [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for shape " +
                         shape_string(in.shape()));
  }
  Node n;
  n.kind = OpKind::slice;
  n.inputs = {x.id()};
  n.offset = start;
  n.value = in.rank() == 2 ? Tensor({rows, count}) : Tensor({count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(in.data().begin() + r * cols + start, count,
                n.value.data().begin() + r * count);
  }
  return g.record(std::move(n));
}

Var sum_last(Var x) {
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  const std::size_t rows = in.rows(), cols = in.cols();
  Node n;
  n.kind = OpKind::sum_last;
  n.inputs = {x.id()};
  n.value = Tensor({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += in[r * cols + c];
    n.value[r] = total;
  }
  return g.record(std::move(n));
}

Var batch_norm(Var x, Var gamma, Var beta, RunningStats stats) {
  Graph& g = common_graph(x, gamma);
  if (beta.graph() != &g) throw ContractError("batch_norm operands belong to different graphs");
  const Tensor& in = x.value();
  if (in.rank() != 2) throw DimensionError("op 'batchnorm': expects [batch, features], got " +
                                           shape_string(in.shape()));
  const std::size_t batch = in.rows(), features = in.cols();
  if (gamma.value().size() != features || beta.value().size() != features) {
    shape_error("batchnorm", in.shape(), gamma.shape());
  }
  if (stats.mean == nullptr || stats.var == nullptr || stats.mean->size() != features ||
      stats.var->size() != features) {
    throw DimensionError("op 'batchnorm': running statistics do not match " +
                         std::to_string(features) + " features");
  }

  Node n;
  n.kind = OpKind::batchnorm;
  n.inputs = {x.id(), gamma.id(), beta.id()};
  n.value = Tensor(in.shape());
  n.saved_a = Tensor(in.shape());  // normalized input
  n.saved_b = Tensor({features});  // 1 / sqrt(var + eps)
  std::vector<double> mu(features, 0.0), var(features, 0.0);

  if (g.training()) {
    if (batch < 2) {
      throw ContractError("batch_norm in train mode needs batch size >= 2, got " +
                          std::to_string(batch));
    }
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t c = 0; c < features; ++c) mu[c] += in[r * features + c];
    }
    for (double& m : mu) m /= static_cast<double>(batch);
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t c = 0; c < features; ++c) {
        const double d = in[r * features + c] - mu[c];
        var[c] += d * d;
      }
    }
    for (double& v : var) v /= static_cast<double>(batch);
    for (std::size_t c = 0; c < features; ++c) {
      (*stats.mean)[c] = stats.momentum * (*stats.mean)[c] + (1.0 - stats.momentum) * mu[c];
      (*stats.var)[c] = stats.momentum * (*stats.var)[c] + (1.0 - stats.momentum) * var[c];
    }
    n.alpha = 1.0;
  } else {
    std::copy(stats.mean->data().begin(), stats.mean->data().end(), mu.begin());
    std::copy(stats.var->data().begin(), stats.var->data().end(), var.begin());
    n.alpha = 0.0;
  }

  const Tensor& gm = gamma.value();
  const Tensor& bt = beta.value();
  for (std::size_t c = 0; c < features; ++c) n.saved_b[c] = 1.0 / std::sqrt(var[c] + stats.eps);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < features; ++c) {
      const std::size_t i = r * features + c;
      const double xhat = (in[i] - mu[c]) * n.saved_b[c];
      n.saved_a[i] = xhat;
      n.value[i] = gm[c] * xhat + bt[c];
    }
  }
  return g.record(std::move(n));
}

Var dropout(Var x, double ratio, std::mt19937_64& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ContractError("dropout ratio must be in [0, 1), got " + std::to_string(ratio));
  }
  Graph& g = graph_of(x);
  const Tensor& in = x.value();
  Node n;
  n.kind = OpKind::dropout;
  n.inputs = {x.id()};
  n.value = in;
  if (g.training() && ratio > 0.0) {
    n.saved_a = Tensor(in.shape());
    const double keep_scale = 1.0 / (1.0 - ratio);
    std::bernoulli_distribution keep(1.0 - ratio);
    for (std::size_t i = 0; i < in.size(); ++i) {
      n.saved_a[i] = keep(rng) ? keep_scale : 0.0;
      n.value[i] = in[i] * n.saved_a[i];
    }
  }
  return g.record(std::move(n));
}

namespace detail {

void propagate(const Node& node, const Tensor& grad, std::vector<Node>& nodes) {
  auto input = [&](std::size_t i) -> Node& { return nodes[node.inputs[i]]; };
  const std::size_t size = node.value.size();

  switch (node.kind) {
    case OpKind::leaf:
      return;

    case OpKind::matmul: {
      Node& a = input(0);
      Node& b = input(1);
      const std::size_t m = a.value.rows(), k = a.value.cols(), n_cols = b.value.cols();
      ConstMap gm(grad.data().data(), m, n_cols);
      if (a.requires_grad) {
        MutMap ga(grad_buffer(a).data().data(), m, k);
        ga.noalias() += gm * ConstMap(b.value.data().data(), k, n_cols).transpose();
      }
      if (b.requires_grad) {
        MutMap gb(grad_buffer(b).data().data(), k, n_cols);
        gb.noalias() += ConstMap(a.value.data().data(), m, k).transpose() * gm;
      }
      return;
    }

    case OpKind::add:
    case OpKind::mul: {
      Node& a = input(0);
      Node& b = input(1);
      const std::size_t rows = node.value.rows(), cols = node.value.cols();
      const bool is_mul = node.kind == OpKind::mul;
      // Read operand values before touching either grad buffer; `a` and `b`
      // may be the same node.
      const Tensor a_val = is_mul ? a.value : Tensor();
      const Tensor b_val = is_mul ? b.value : Tensor();
      if (a.requires_grad) reduce_into(grad_buffer(a), grad, rows, cols, is_mul ? &b_val : nullptr);
      if (b.requires_grad) reduce_into(grad_buffer(b), grad, rows, cols, is_mul ? &a_val : nullptr);
      return;
    }

    case OpKind::concat: {
      const std::size_t rows = node.value.rows(), cols = node.value.cols();
      std::size_t offset = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        Node& in = input(i);
        const std::size_t pc = in.value.cols();
        if (in.requires_grad) {
          Tensor& gi = grad_buffer(in);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < pc; ++c) gi[r * pc + c] += grad[r * cols + offset + c];
          }
        }
        offset += pc;
      }
      return;
    }

    case OpKind::relu: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      for (std::size_t i = 0; i < size; ++i) gx[i] += x.value[i] > 0.0 ? grad[i] : 0.0;
      return;
    }

    case OpKind::sigmoid: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      for (std::size_t i = 0; i < size; ++i) {
        const double s = node.value[i];
        gx[i] += grad[i] * s * (1.0 - s);
      }
      return;
    }

    case OpKind::softmax: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      const std::size_t rows = node.value.rows(), cols = node.value.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += grad[r * cols + c] * node.value[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          gx[i] += node.value[i] * (grad[i] - dot);
        }
      }
      return;
    }

    case OpKind::log: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      for (std::size_t i = 0; i < size; ++i) gx[i] += grad[i] / x.value[i];
      return;
    }

    case OpKind::exp: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      for (std::size_t i = 0; i < size; ++i) gx[i] += grad[i] * node.value[i];
      return;
    }

    case OpKind::mean: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      const double share = grad[0] / static_cast<double>(x.value.size());
      for (double& v : gx.data()) v += share;
      return;
    }

    case OpKind::scale: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      for (std::size_t i = 0; i < size; ++i) gx[i] += grad[i] * node.alpha;
      return;
    }

    case OpKind::clamp: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      for (std::size_t i = 0; i < size; ++i) {
        const double v = x.value[i];
        if (v >= node.alpha && v <= node.beta) gx[i] += grad[i];
      }
      return;
    }

    case OpKind::slice: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      const std::size_t rows = node.value.rows(), count = node.value.cols();
      const std::size_t cols = x.value.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < count; ++c) {
          gx[r * cols + node.offset + c] += grad[r * count + c];
        }
      }
      return;
    }

    case OpKind::sum_last: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      const std::size_t rows = x.value.rows(), cols = x.value.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += grad[r];
      }
      return;
    }

    case OpKind::batchnorm: {
      Node& x = input(0);
      Node& gamma = input(1);
      Node& beta = input(2);
      const std::size_t batch = node.value.rows(), features = node.value.cols();
      const Tensor& xhat = node.saved_a;
      const Tensor& inv_std = node.saved_b;
      std::vector<double> sum_g(features, 0.0), sum_gx(features, 0.0);
      for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t c = 0; c < features; ++c) {
          const std::size_t i = r * features + c;
          sum_g[c] += grad[i];
          sum_gx[c] += grad[i] * xhat[i];
        }
      }
      if (gamma.requires_grad) {
        Tensor& gg = grad_buffer(gamma);
        for (std::size_t c = 0; c < features; ++c) gg[c] += sum_gx[c];
      }
      if (beta.requires_grad) {
        Tensor& gb = grad_buffer(beta);
        for (std::size_t c = 0; c < features; ++c) gb[c] += sum_g[c];
      }
      if (x.requires_grad) {
        Tensor& gx = grad_buffer(x);
        const bool batch_stats = node.alpha != 0.0;
        const double nb = static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t c = 0; c < features; ++c) {
            const std::size_t i = r * features + c;
            const double gam = gamma.value[c];
            if (batch_stats) {
              gx[i] += gam * inv_std[c] / nb *
                       (nb * grad[i] - sum_g[c] - xhat[i] * sum_gx[c]);
            } else {
              gx[i] += gam * inv_std[c] * grad[i];
            }
          }
        }
      }
      return;
    }

    case OpKind::dropout: {
      Node& x = input(0);
      if (!x.requires_grad) return;
      Tensor& gx = grad_buffer(x);
      if (node.saved_a.empty()) {
        for (std::size_t i = 0; i < size; ++i) gx[i] += grad[i];
      } else {
        for (std::size_t i = 0; i < size; ++i) gx[i] += grad[i] * node.saved_a[i];
      }
      return;
    }
  }
}

}  // namespace detail

}  // namespace mlpr::ad
