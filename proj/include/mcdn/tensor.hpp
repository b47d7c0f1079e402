// SPDX-License-Identifier: Apache-2.0
/**
 * @file   tensor.hpp
 * @brief  Dense double-precision tensor with reverse-mode differentiation.
 *
 * A Tensor is a shared handle to a graph node. Ops record their parents and a
 * backward closure on the result node; calling backward() on a scalar walks the
 * recorded graph in reverse topological order. Leaf tensors (parameters)
 * accumulate gradients across calls; intermediate nodes are reset per call.
 * The graph is dropped when the last handle to the result goes away, so each
 * batch builds a fresh tape.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcdn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape &shape);
std::string shape_str(const Shape &shape);

/// Dimension / extent mismatch between operands.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Numerically invalid input (fully masked softmax row, non-finite loss, ...).
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward_fn;

  Node() = default;
  Node(const Node &) = delete;
  Node &operator=(const Node &) = delete;
  /// Releases long parent chains iteratively instead of recursively.
  ~Node();

  void ensure_grad() {
    if (grad.size() != data.size())
      grad.assign(data.size(), 0.0);
  }
};

} // namespace detail

class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Row-major matrix from nested rows; all rows must share a length.
  static Tensor matrix(const std::vector<std::vector<double>> &rows,
                       bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape &shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return data().size(); }
  /// Extent along `axis`; negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse-mode sweep from this scalar. Throws ShapeError on non-scalars.
  void backward() const;

  /// Fresh leaf holding a copy of this tensor's values (no graph, no grad).
  Tensor detach() const;
  /// Deep copy that keeps the trainable flag but not the graph.
  Tensor clone() const;

  bool same_node(const Tensor &other) const { return node_ == other.node_; }

  // Internal: used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node> &node() const { return node_; }

private:
  std::shared_ptr<detail::Node> node_;
};

/// True while graph recording is enabled on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

namespace detail {

/// Builds a result node; attaches parents/backward only when recording and at
/// least one parent needs a gradient.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::vector<Tensor> parents,
                   std::function<void(Node &)> backward_fn);

} // namespace detail

} // namespace mcdn
