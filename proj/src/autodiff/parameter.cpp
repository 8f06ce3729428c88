#include "mlpr/autodiff/parameter.hpp"

#include "mlpr/error.hpp"

namespace mlpr::ad {

void Parameter::zero_grad() {
  if (trainable) grad = Tensor(value.shape(), 0.0);
}

Parameter& ParameterStore::create(const std::string& name, Tensor init,
                                  bool trainable) {
  if (index_.contains(name)) {
    throw ContractError("duplicate parameter name '" + name + "'");
  }
  Parameter p;
  p.name = name;
  p.trainable = trainable;
  if (trainable) p.grad = Tensor(init.shape(), 0.0);
  p.value = std::move(init);
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return params_[it->second];
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.contains(name);
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p.trainable) out.push_back(&p);
  }
  return out;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (p.trainable) p.grad.fill(0.0);
  }
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

}  // namespace mlpr::ad
