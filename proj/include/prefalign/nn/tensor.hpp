#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace prefalign::nn {

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every operation allocates a result node that remembers its parents and a
// closure propagating the result's gradient into them. Calling backward() on
// a 1x1 tensor walks the graph in reverse topological order. Leaves created
// with requires_grad (model parameters) accumulate gradients across calls
// until zeroed.

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor from(int rows, int cols, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const noexcept { return node_ != nullptr; }
  int rows() const noexcept { return node_->rows; }
  int cols() const noexcept { return node_->cols; }
  std::size_t size() const noexcept { return node_->value.size(); }
  bool requires_grad() const noexcept { return node_->requires_grad; }

  double at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
  double& at(int r, int c) { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
  std::span<double> values() noexcept { return node_->value; }
  std::span<const double> values() const noexcept { return node_->value; }
  /// Gradient buffer; allocated zero-filled on first access.
  std::span<double> grad();
  double item() const;

  /// Backpropagates from this scalar. Seeds d(self)/d(self) = 1.
  void backward() const;

  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& shared() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph construction in its scope (inference, reference models).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

namespace detail {
/// Allocates a result node; wires parents only when a gradient can flow.
Tensor make_result(int rows, int cols, std::initializer_list<const Tensor*> parents);
}  // namespace detail

}  // namespace prefalign::nn
