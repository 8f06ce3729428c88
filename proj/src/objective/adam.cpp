#include "mlpr/objective/adam.hpp"

#include <cmath>

#include "mlpr/error.hpp"

namespace mlpr::objective {

Adam::Adam(std::vector<ad::Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0) || !(options_.eps > 0.0) || options_.beta1 < 0.0 ||
      options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
    throw ContractError("invalid Adam hyperparameters");
  }
  for (const auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  for (const auto* p : params_) {
    if (!p->grad.same_shape(p->value)) {
      throw DimensionError("gradient of '" + p->name + "' has shape " +
                           ad::shape_string(p->grad.shape()) + ", parameter " +
                           ad::shape_string(p->value.shape()));
    }
    if (!p->grad.all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + p->name + "'");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto value = params_[i]->value.data();
    auto grad = params_[i]->grad.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * grad[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * grad[j] * grad[j];
      value[j] -= options_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.eps);
    }
  }
}

}  // namespace mlpr::objective
