#include "prefalign/nn/tensor.hpp"

#include <unordered_set>

#include "prefalign/common/error.hpp"

namespace prefalign::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(int rows, int cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    throw Error("Tensor::from: value count does not match shape");
  }
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from(1, 1, {v}); }

std::span<double> Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw Error("Tensor::item: tensor is not a scalar");
  return node_->value[0];
}

void Tensor::backward() const {
  if (size() != 1) throw Error("Tensor::backward: root must be a scalar");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->ensure_grad();
      n->backward(*n);
    }
  }
  // Interior gradients are no longer needed; drop them so a graph that is
  // re-used (it never is, by construction) cannot double count.
  for (Node* n : order) {
    if (n->backward) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

namespace detail {

Tensor make_result(int rows, int cols, std::initializer_list<const Tensor*> parents) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  if (g_grad_enabled) {
    for (const Tensor* p : parents) {
      if (p->requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
    if (n->requires_grad) {
      for (const Tensor* p : parents) n->parents.push_back(p->shared());
    }
  }
  return Tensor(std::move(n));
}

}  // namespace detail

}  // namespace prefalign::nn
