// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// Dense tensors with tape-free reverse-mode autodiff. Every operation that has
// at least one gradient-tracking input records its parents and a closure that
// pushes the output gradient back into them; backward() walks that graph in
// reverse topological order.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mavseg/error.hpp"

namespace mavseg::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_count(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

namespace detail {
inline thread_local bool grad_enabled = true;
inline thread_local std::uint64_t* branch_hash = nullptr;

inline void mix_branch(std::uint64_t v) {
  if (branch_hash) *branch_hash = (*branch_hash ^ v) * 0x100000001b3ULL;
}
}  // namespace detail

/// While alive, piecewise ops (relu, maxpool2) on this thread fold the branch
/// each element takes into a hash. Two forwards with equal hashes ran through
/// the same linear piece, which lets finite-difference checks skip probes that
/// straddle a kink.
class BranchTrace {
public:
  BranchTrace() : prev_(detail::branch_hash) { detail::branch_hash = &hash_; }
  ~BranchTrace() { detail::branch_hash = prev_; }
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;
  std::uint64_t hash() const { return hash_; }

private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::uint64_t* prev_;
};

/// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
public:
  NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <class T>
class Tensor {
public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_count(shape);
    return from(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    for (auto d : shape) require(d > 0, "Tensor: dimensions must be positive");
    require(shape_count(shape) == data.size(), "Tensor: data length " + std::to_string(data.size()) +
                                                   " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }
  T item() const {
    require(size() == 1, "Tensor::item on a non-scalar");
    return node_->value[0];
  }

  /// Gradient accumulated by the last backward(); zeros if none reached this tensor.
  std::vector<T>& grad() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  /// Detached copy sharing no graph.
  Tensor detach() const { return from(shape(), node_->value, false); }

  /// Reverse pass from a scalar.
  void backward() {
    require(size() == 1, "backward() requires a scalar output");
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, i] = stack.back();
      if (i < n->parents.size()) {
        Node<T>* p = n->parents[i++].get();
        if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backward && !(*it)->grad.empty()) (*it)->backward(**it);
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  /// Builds an op result. When any parent tracks gradients, the result records
  /// the parents and the closure; otherwise it is a plain constant.
  static Tensor make(Shape shape, std::vector<T> value, std::vector<Tensor> parents,
                     std::function<void(Node<T>&)> backward) {
    auto t = from(std::move(shape), std::move(value), false);
    bool any = false;
    if (detail::grad_enabled)
      for (auto& p : parents) any = any || p.requires_grad();
    if (any) {
      t.node_->requires_grad = true;
      for (auto& p : parents) t.node_->parents.push_back(p.node_);
      t.node_->backward = std::move(backward);
    }
    return t;
  }

private:
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  std::shared_ptr<Node<T>> node_;
};

/// Grad buffer of a parent if it participates in backward, else nullptr.
template <class T>
T* parent_grad(Node<T>& n, std::size_t i) {
  auto& p = *n.parents[i];
  return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

}  // namespace mavseg::nn
