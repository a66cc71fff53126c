#pragma once

// Minimal reverse-mode differentiation over Tensor values. A Var is a handle
// to a graph node; ops in ops.hpp build the graph while gradients are enabled
// and Var::backward() propagates from a scalar root.

#include <functional>
#include <memory>
#include <vector>

#include "dfbench/tensor.hpp"

namespace dfbench::nn {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Empty tensor when no gradient has been accumulated.
  const Tensor& grad() const { return node_->grad; }
  void zero_grad();

  // Seeds d(root)/d(root) = 1; root must hold exactly one element.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

// Disables graph construction for the lifetime of the guard (thread-local).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Wraps an op result. The backward closure is recorded only when gradients are
// enabled and at least one input requires them; it reads self.grad and adds
// into self.parents[i]->grad_buffer() for parents that require grad.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

inline bool wants_grad(const Node& self, std::size_t i) {
  return self.parents[i] && self.parents[i]->requires_grad;
}

}  // namespace detail

}  // namespace dfbench::nn
