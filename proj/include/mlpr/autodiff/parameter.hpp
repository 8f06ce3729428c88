#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "mlpr/autodiff/tensor.hpp"

namespace mlpr::ad {

// A named tensor owned by a model. Trainable parameters carry a gradient
// buffer of the same shape; buffers (batch-norm running statistics) do not.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad();
};

// Owns parameters at stable addresses, in creation order. Creation order is
// also checkpoint order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& create(const std::string& name, Tensor init, bool trainable = true);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter*> trainable();
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<std::string> names() const;

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace mlpr::ad
