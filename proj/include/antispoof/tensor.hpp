#pragma once

// Dense row-major tensors with tape-free reverse-mode autodiff.
// Each tensor is a handle to a shared node; ops link output nodes to their
// inputs and install a backprop closure. The graph is only recorded when an
// input requires a gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace antispoof {

using Shape = std::vector<std::size_t>;

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : node_(std::make_shared<TensorNode<T>>()) {
    node_->shape = {1};
    node_->value = {T(0)};
  }

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
    for (std::size_t d : shape)
      if (d == 0) throw TensorError("tensor: zero dimension in shape " + shape_str(shape));
    if (numel(shape) != values.size())
      throw TensorError("tensor: shape " + shape_str(shape) + " does not match " +
                        std::to_string(values.size()) + " values");
    node_ = std::make_shared<TensorNode<T>>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, v), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  T item() const {
    if (size() != 1) throw TensorError("item: tensor has " + std::to_string(size()) + " elements");
    return node_->value[0];
  }

  // Value-only copy, disconnected from the graph.
  Tensor detach() const { return Tensor(node_->shape, node_->value, false); }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

  static Tensor from_node(std::shared_ptr<TensorNode<T>> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

namespace detail {

// Builds the output of an op. The backprop closure receives the output node
// (grad already populated) and pushes gradients into the captured parents.
template <class T>
Tensor<T> make_op(Shape shape, std::vector<T> value,
                  std::vector<std::shared_ptr<TensorNode<T>>> parents,
                  std::function<void(TensorNode<T>&)> backprop) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool rg = false;
  for (auto& p : parents)
    if (p->requires_grad) rg = true;
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Tensor<T>::from_node(std::move(n));
}

}  // namespace detail

// Reverse accumulation from a scalar root. Gradients sum over all paths and
// land on every requires_grad leaf reachable from the root.
template <class T>
void backward(const Tensor<T>& root) {
  if (root.size() != 1) throw TensorError("backward: root must be a scalar tensor");
  auto root_node = root.node();
  if (!root_node->requires_grad)
    throw TensorError("backward: root does not require grad");

  // iterative post-order DFS -> topological order (parents before children)
  std::vector<TensorNode<T>*> topo;
  std::unordered_set<TensorNode<T>*> visited;
  struct Frame {
    TensorNode<T>* n;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root_node.get(), 0});
  visited.insert(root_node.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      TensorNode<T>* p = f.n->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.n);
      stack.pop_back();
    }
  }

  root_node->ensure_grad();
  root_node->grad[0] = T(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode<T>* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace antispoof
