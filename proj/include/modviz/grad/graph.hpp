#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "modviz/grad/tensor.hpp"

namespace modviz::grad {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows into it
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_rule;
  const char* rule = "leaf";
  bool requires_grad = false;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a node in the autodiff graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  /// Leaf holding `value`; parameters pass requires_grad=true.
  static Var leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  bool valid() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Accumulated gradient; zeros if nothing reached this node.
  const Tensor<T>& grad() const { return node_->grad_buffer(); }
  void zero_grad() const {
    if (node_->grad.size()) node_->grad.fill(T(0));
  }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// While alive, ops on this thread build no backward graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Builds the output node of an op. The backward rule is attached only when
/// some parent requires a gradient and recording is enabled.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, const char* rule,
                   std::function<void(Node<T>&)> backward_rule) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->rule = rule;
  bool needs = false;
  for (auto& p : parents) needs = needs || p.requires_grad();
  if (needs && grad_enabled()) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward_rule = std::move(backward_rule);
  }
  return Var<T>(std::move(n));
}

/// Reverse-mode sweep from a scalar. `seed` is d(output)/d(loss) at the root.
/// Each node's rule runs once, in reverse topological order; leaf gradients
/// accumulate across calls until zeroed.
template <typename T>
void backward(const Var<T>& loss, T seed = T(1));

}  // namespace modviz::grad
