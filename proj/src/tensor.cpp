// SPDX-License-Identifier: Apache-2.0
#include "mcdn/tensor.hpp"

#include <numeric>
#include <sstream>
#include <unordered_set>

namespace mcdn {

namespace {
thread_local bool t_grad_enabled = true;

const detail::Node &checked(const std::shared_ptr<detail::Node> &node) {
  if (!node)
    throw std::logic_error("access to undefined tensor");
  return *node;
}
} // namespace

std::size_t shape_numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto extent : shape)
    if (extent == 0)
      throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != values.size())
    throw ShapeError("shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(const std::vector<std::vector<double>> &rows,
                      bool requires_grad) {
  if (rows.empty() || rows.front().empty())
    throw ShapeError("matrix literal must be nonempty");
  const std::size_t cols = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto &row : rows) {
    if (row.size() != cols)
      throw ShapeError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({rows.size(), cols}, std::move(values), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

const Shape &Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(int axis) const {
  const auto &s = shape();
  const int r = static_cast<int>(s.size());
  const int a = axis < 0 ? r + axis : axis;
  if (a < 0 || a >= r)
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  return s[static_cast<std::size_t>(a)];
}

std::size_t Tensor::rows() const {
  if (rank() != 2)
    throw ShapeError("rows() requires a matrix, got " + shape_str(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2)
    throw ShapeError("cols() requires a matrix, got " + shape_str(shape()));
  return shape()[1];
}

std::span<const double> Tensor::data() const { return checked(node_).data; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on non-scalar " + shape_str(shape()));
  return data()[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return data()[r * cols() + c];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  checked(node_);
  if (!node_->is_leaf)
    throw std::logic_error("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const {
  const auto &n = checked(node_);
  return n.grad.size() == n.data.size();
}

std::span<const double> Tensor::grad() const {
  const auto &n = checked(node_);
  if (n.grad.size() != n.data.size())
    throw std::logic_error("tensor has no gradient");
  return n.grad;
}

std::span<double> Tensor::mutable_grad() {
  checked(node_);
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  checked(node_);
  node_->grad.assign(node_->data.size(), 0.0);
}

void Tensor::backward() const {
  const auto &root = checked(node_);
  if (root.data.size() != 1)
    throw ShapeError("backward() requires a scalar loss, got " +
                     shape_str(root.shape));
  if (!root.requires_grad)
    return;

  // Iterative post-order DFS; recurrent chains can be thousands deep.
  std::vector<detail::Node *> order;
  std::unordered_set<detail::Node *> visited;
  std::vector<std::pair<detail::Node *, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node *parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto *node : order) {
    if (node->is_leaf)
      node->ensure_grad();
    else
      node->grad.assign(node->data.size(), 0.0);
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn)
      (*it)->backward_fn(**it);
}

Tensor Tensor::detach() const {
  return from(shape(), std::vector<double>(data().begin(), data().end()));
}

Tensor Tensor::clone() const {
  auto copy = detach();
  copy.node_->requires_grad = requires_grad();
  return copy;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

Node::~Node() {
  std::vector<std::shared_ptr<Node>> pending = std::move(parents);
  while (!pending.empty()) {
    std::shared_ptr<Node> next = std::move(pending.back());
    pending.pop_back();
    if (next.use_count() == 1)
      for (auto &p : next->parents)
        pending.push_back(std::move(p));
  }
}

Tensor make_result(Shape shape, std::vector<double> data,
                   std::vector<Tensor> parents,
                   std::function<void(Node &)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->is_leaf = false;
  bool needs = false;
  if (t_grad_enabled)
    for (const auto &p : parents)
      needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto &p : parents)
      node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

} // namespace detail

} // namespace mcdn
