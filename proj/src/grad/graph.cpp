#include "modviz/grad/graph.hpp"

#include <unordered_set>

namespace modviz::grad {

namespace {
thread_local bool t_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

template <typename T>
void backward(const Var<T>& loss, T seed) {
  if (!loss.valid() || loss.size() != 1)
    throw ShapeError("backward needs a scalar root, got " + (loss.valid() ? shape_string(loss.shape()) : "null"));
  Node<T>* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_rule && n->grad.size() == n->value.size()) n->backward_rule(*n);
  }
}

template void backward<float>(const Var<float>&, float);
template void backward<double>(const Var<double>&, double);

}  // namespace modviz::grad
