#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace mdsam {

// Reverse-mode tape node. Graphs are built define-by-run by the free
// functions in ops.hpp / image_ops.hpp; backward() walks them once in
// reverse topological order. Gradients accumulate, so calling backward on
// several per-sample graphs that share the same leaves implements batch
// gradient accumulation.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_allocated = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad_allocated) {
      grad = Tensor(value.shape());
      grad_allocated = true;
    }
    return grad;
  }

  void zero_grad() {
    if (grad_allocated) grad.fill(0);
  }
};

using Var = std::shared_ptr<Node>;

inline Var leaf(Tensor v, bool requires_grad = false) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return n;
}

inline Var constant(Tensor v) { return leaf(std::move(v), false); }

// Creates an op node. Parents and the backward closure are dropped when no
// parent needs gradients, which prunes pure-preprocessing subgraphs.
inline Var make_op(Tensor v, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

namespace detail {

inline void topo_order(Node* root, std::vector<Node*>& order) {
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Backpropagates from a scalar root. `seed` is the upstream derivative
// (1/batch_size gives batch-mean accumulation directly).
inline void backward(const Var& root, Scalar seed = 1.0) {
  if (root->value.size() != 1) {
    throw std::logic_error("backward: root must be scalar, got " + root->value.shape_str());
  }
  if (!root->requires_grad) return;
  std::vector<Node*> order;
  detail::topo_order(root.get(), order);
  root->ensure_grad()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad_allocated) n->backward_fn(*n);
  }
}

}  // namespace mdsam
