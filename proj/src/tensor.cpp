#include "jointgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace jointgan::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> values,
                                      bool requires_grad) {
  if (shape.empty()) throw AutodiffError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw AutodiffError("tensor shape " + shape_string(shape) + " has a zero axis");
  }
  if (shape_size(shape) != values.size()) {
    throw AutodiffError("tensor shape " + shape_string(shape) + " does not match " +
                        std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(values));
  impl->requires_grad = requires_grad;
  return impl;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs)
    : AutodiffError(op + ": incompatible shapes " + shape_string(lhs) + " and " +
                    shape_string(rhs)),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

NonFiniteError::NonFiniteError(std::string op, std::uint64_t node_index)
    : AutodiffError(op + ": non-finite value at node " + std::to_string(node_index)),
      op_(std::move(op)),
      node_index_(node_index) {}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Exp: return "exp";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::ClampMin: return "clamp_min";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::L1Norm: return "l1_norm";
    case OpKind::L2Norm: return "l2_norm";
  }
  return "unknown";
}

void TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data->size(), 0.0);
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(make_impl(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  auto n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  std::vector<double> values;
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != cols) throw AutodiffError("matrix literal has ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(values), requires_grad);
}

Tensor Tensor::from_impl(std::shared_ptr<TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw AutodiffError("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::size() const { return impl_->data->size(); }

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }

std::size_t Tensor::cols() const { return rank() == 2 ? shape()[1] : shape()[0]; }

std::span<double> Tensor::data() { return impl_->values(); }

std::span<const double> Tensor::data() const {
  return std::as_const(*impl_).values();
}

double Tensor::at(std::size_t i) const { return (*impl_->data).at(i); }

double Tensor::at(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= cols()) throw AutodiffError("tensor index out of range");
  return (*impl_->data)[row * cols() + col];
}

double Tensor::item() const {
  if (size() != 1) {
    throw AutodiffError("item() on non-scalar tensor of shape " + shape_string(shape()));
  }
  return (*impl_->data)[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw AutodiffError("requires_grad can only be toggled on leaf tensors");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return impl_->producer == nullptr; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<double> Tensor::grad() { return impl_->grad; }

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->data->size(), 0.0);
}

void Tensor::clear_grad() { impl_->grad.clear(); }

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return from_impl(std::move(impl));
}

Tensor Tensor::clone() const {
  Tensor t(impl_->shape, *impl_->data, false);
  t.impl_->requires_grad = impl_->requires_grad && is_leaf();
  t.impl_->grad = impl_->grad;
  return t;
}

Graph Graph::collect(const Tensor& root) {
  Graph graph;
  std::unordered_set<const TensorImpl*> visited;
  // Iterative post-order DFS: operands are emitted before their outputs.
  std::vector<std::pair<std::shared_ptr<TensorImpl>, std::size_t>> stack;
  if (root.impl()->producer) stack.emplace_back(root.impl(), 0);
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto& inputs = impl->producer->inputs;
    if (next < inputs.size()) {
      auto child = inputs[next++];
      if (child->producer && visited.insert(child.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
      continue;
    }
    graph.outputs.push_back(impl);
    stack.pop_back();
  }
  return graph;
}

void backward(const Tensor& root) {
  if (!root.defined()) throw AutodiffError("backward: undefined root");
  if (root.size() != 1) {
    throw AutodiffError("backward: root must be scalar, got shape " + shape_string(root.shape()));
  }
  if (!root.requires_grad()) {
    throw AutodiffError("backward: root is detached (no recorded graph)");
  }
  auto& root_impl = *root.impl();
  if (!root_impl.producer) {
    root_impl.ensure_grad();
    root_impl.grad[0] += 1.0;
    return;
  }

  Graph graph = Graph::collect(root);
  root_impl.grad.assign(1, 1.0);
  for (auto it = graph.outputs.rbegin(); it != graph.outputs.rend(); ++it) {
    TensorImpl& out = **it;
    if (out.grad.empty()) continue;
    out.producer->backward(out);
    for (const auto& input : out.producer->inputs) {
      if (!input->requires_grad || input->grad.empty()) continue;
      for (double g : input->grad) {
        if (!std::isfinite(g)) {
          throw NonFiniteError(std::string(op_name(out.producer->kind)) + " (backward)",
                               out.producer->index);
        }
      }
    }
  }
  for (const auto& impl : graph.outputs) {
    impl->grad.clear();
    impl->grad.shrink_to_fit();
    impl->producer.reset();
    impl->requires_grad = false;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

}  // namespace jointgan::ad
