#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jointgan::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class AutodiffError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the named operation.
class ShapeError : public AutodiffError {
 public:
  ShapeError(std::string op, Shape lhs, Shape rhs);

  const std::string& op() const { return op_; }
  const Shape& lhs() const { return lhs_; }
  const Shape& rhs() const { return rhs_; }

 private:
  std::string op_;
  Shape lhs_;
  Shape rhs_;
};

/// A forward or backward pass produced NaN or Inf.
class NonFiniteError : public AutodiffError {
 public:
  NonFiniteError(std::string op, std::uint64_t node_index);

  const std::string& op() const { return op_; }
  std::uint64_t node_index() const { return node_index_; }

 private:
  std::string op_;
  std::uint64_t node_index_;
};

enum class OpKind {
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Tanh,
  Relu,
  LeakyRelu,
  Sigmoid,
  Exp,
  LogSoftmax,
  ClampMin,
  Concat,
  Slice,
  Sum,
  Mean,
  L1Norm,
  L2Norm,
};

const char* op_name(OpKind kind);

struct TensorImpl;

/// One recorded operation. The backward rule reads the output gradient and
/// accumulates into the operands' gradients.
struct Node {
  OpKind kind;
  std::uint64_t index;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  std::vector<double> grad;  // empty when absent
  bool requires_grad = false;
  std::shared_ptr<Node> producer;  // null for leaves and constants

  std::span<double> values() { return {data->data(), data->size()}; }
  std::span<const double> values() const { return {data->data(), data->size()}; }
  void ensure_grad();
};

/// Dense row-major array of doubles. Copies are handles onto the same
/// storage and graph position; use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor from_impl(std::shared_ptr<TensorImpl> impl);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data();
  std::span<const double> data() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  /// Allocates a zeroed gradient buffer when absent.
  void zero_grad();
  void clear_grad();

  /// Leaf sharing this tensor's storage, outside any graph.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Recorded operations in execution order, as reconstructed from a root.
struct Graph {
  std::vector<std::shared_ptr<TensorImpl>> outputs;

  static Graph collect(const Tensor& root);
  std::size_t size() const { return outputs.size(); }
};

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires
/// gradients, then releases the graph.
void backward(const Tensor& root);

/// While alive, operations on this thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

}  // namespace jointgan::ad
