#pragma once

#include <string>
#include <vector>

#include "modviz/grad/graph.hpp"

namespace modviz::grad {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
  std::string init;  // initialization scheme, recorded in checkpoints
};

/// Ordered, named trainable tensors of a model.
template <typename T>
class ParamSet {
 public:
  Var<T> add(std::string name, Tensor<T> value, std::string init) {
    for (const auto& p : params_)
      if (p.name == name) throw InvalidArgument("duplicate parameter name " + name);
    auto v = Var<T>::leaf(std::move(value), true);
    params_.push_back({std::move(name), v, std::move(init)});
    return v;
  }

  const std::vector<NamedParam<T>>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  const NamedParam<T>& at(std::size_t i) const { return params_.at(i); }
  const NamedParam<T>& find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p;
    throw InvalidArgument("no parameter named " + name);
  }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var.size();
    return n;
  }

  void zero_grad() const {
    for (const auto& p : params_) p.var.zero_grad();
  }

 private:
  std::vector<NamedParam<T>> params_;
};

}  // namespace modviz::grad
