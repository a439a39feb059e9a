#include "jointgan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace jointgan::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

thread_local std::uint64_t g_node_counter = 0;

using Rule = std::function<void(const TensorImpl& out)>;

// Builds the output tensor, validates finiteness, and records a graph node
// when gradients are enabled and any operand needs them.
Tensor emit(OpKind kind, Shape shape, std::vector<double> values,
            std::vector<std::shared_ptr<TensorImpl>> inputs, Rule rule) {
  const std::uint64_t index = g_node_counter++;
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError(op_name(kind), index);
  }
  Tensor out(std::move(shape), std::move(values), false);
  const bool record =
      grad_mode_enabled() &&
      std::any_of(inputs.begin(), inputs.end(), [](const auto& in) { return in->requires_grad; });
  if (record) {
    auto node = std::make_shared<Node>();
    node->kind = kind;
    node->index = index;
    node->inputs = std::move(inputs);
    node->backward = std::move(rule);
    out.impl()->producer = std::move(node);
    out.impl()->requires_grad = true;
  }
  return out;
}

TensorImpl& grad_target(const std::shared_ptr<TensorImpl>& impl) {
  impl->ensure_grad();
  return *impl;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw AutodiffError(std::string(op) + ": undefined operand");
}

template <typename F, typename DF>
Tensor unary(OpKind kind, const Tensor& a, F f, DF df_from_in_out) {
  require_defined(a, op_name(kind));
  auto in = a.data();
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), f);
  auto ai = a.impl();
  return emit(kind, a.shape(), std::move(out), {ai},
              [ai, df_from_in_out](const TensorImpl& o) {
                if (!ai->requires_grad) return;
                auto& target = grad_target(ai);
                const auto& x = *ai->data;
                const auto& y = *o.data;
                for (std::size_t i = 0; i < x.size(); ++i) {
                  target.grad[i] += o.grad[i] * df_from_in_out(x[i], y[i]);
                }
              });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul", a.shape(), b.shape());
  }
  const auto n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  std::vector<double> out(n * m);
  MutMap(out.data(), n, m).noalias() =
      ConstMap(a.data().data(), n, k) * ConstMap(b.data().data(), k, m);
  auto ai = a.impl(), bi = b.impl();
  return emit(OpKind::MatMul, {n, m}, std::move(out), {ai, bi},
              [ai, bi, n, k, m](const TensorImpl& o) {
                ConstMap dC(o.grad.data(), n, m);
                if (ai->requires_grad) {
                  auto& ta = grad_target(ai);
                  MutMap(ta.grad.data(), n, k).noalias() +=
                      dC * ConstMap(bi->data->data(), k, m).transpose();
                }
                if (bi->requires_grad) {
                  auto& tb = grad_target(bi);
                  MutMap(tb.grad.data(), k, m).noalias() +=
                      ConstMap(ai->data->data(), n, k).transpose() * dC;
                }
              });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  auto ai = a.impl(), bi = b.impl();
  if (a.shape() == b.shape()) {
    auto x = a.data(), y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return emit(OpKind::Add, a.shape(), std::move(out), {ai, bi}, [ai, bi](const TensorImpl& o) {
      for (const auto& in : {ai, bi}) {
        if (!in->requires_grad) continue;
        auto& t = grad_target(in);
        for (std::size_t i = 0; i < o.grad.size(); ++i) t.grad[i] += o.grad[i];
      }
    });
  }
  // Row broadcast: [n,m] + [1,m] or [n,m] + [m].
  const bool row_bias = a.rank() == 2 && b.size() == a.shape()[1] &&
                        (b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1));
  if (!row_bias) throw ShapeError("add", a.shape(), b.shape());
  const auto n = a.shape()[0], m = a.shape()[1];
  auto x = a.data(), y = b.data();
  std::vector<double> out(n * m);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] = x[r * m + c] + y[c];
  }
  return emit(OpKind::Add, a.shape(), std::move(out), {ai, bi},
              [ai, bi, n, m](const TensorImpl& o) {
                if (ai->requires_grad) {
                  auto& t = grad_target(ai);
                  for (std::size_t i = 0; i < o.grad.size(); ++i) t.grad[i] += o.grad[i];
                }
                if (bi->requires_grad) {
                  auto& t = grad_target(bi);
                  for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < m; ++c) t.grad[c] += o.grad[r * m + c];
                  }
                }
              });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  if (a.shape() != b.shape()) throw ShapeError("sub", a.shape(), b.shape());
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  auto ai = a.impl(), bi = b.impl();
  return emit(OpKind::Sub, a.shape(), std::move(out), {ai, bi}, [ai, bi](const TensorImpl& o) {
    if (ai->requires_grad) {
      auto& t = grad_target(ai);
      for (std::size_t i = 0; i < o.grad.size(); ++i) t.grad[i] += o.grad[i];
    }
    if (bi->requires_grad) {
      auto& t = grad_target(bi);
      for (std::size_t i = 0; i < o.grad.size(); ++i) t.grad[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.shape() != b.shape()) throw ShapeError("mul", a.shape(), b.shape());
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  auto ai = a.impl(), bi = b.impl();
  return emit(OpKind::Mul, a.shape(), std::move(out), {ai, bi}, [ai, bi](const TensorImpl& o) {
    if (ai->requires_grad) {
      auto& t = grad_target(ai);
      const auto& y = *bi->data;
      for (std::size_t i = 0; i < o.grad.size(); ++i) t.grad[i] += o.grad[i] * y[i];
    }
    if (bi->requires_grad) {
      auto& t = grad_target(bi);
      const auto& x = *ai->data;
      for (std::size_t i = 0; i < o.grad.size(); ++i) t.grad[i] += o.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      OpKind::Scale, a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      OpKind::Tanh, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      OpKind::LeakyRelu, a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      OpKind::Sigmoid, a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(
      OpKind::Exp, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log_softmax(const Tensor& a) {
  require_defined(a, "log_softmax");
  if (a.rank() > 2) throw ShapeError("log_softmax", a.shape(), {});
  const auto n = a.rows(), m = a.cols();
  auto x = a.data();
  std::vector<double> out(n * m);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.data() + r * m;
    const double peak = *std::max_element(row, row + m);
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) total += std::exp(row[c] - peak);
    const double lse = peak + std::log(total);
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] = row[c] - lse;
  }
  auto ai = a.impl();
  return emit(OpKind::LogSoftmax, a.shape(), std::move(out), {ai},
              [ai, n, m](const TensorImpl& o) {
                if (!ai->requires_grad) return;
                auto& t = grad_target(ai);
                const auto& y = *o.data;
                for (std::size_t r = 0; r < n; ++r) {
                  double gsum = 0.0;
                  for (std::size_t c = 0; c < m; ++c) gsum += o.grad[r * m + c];
                  for (std::size_t c = 0; c < m; ++c) {
                    const auto i = r * m + c;
                    t.grad[i] += o.grad[i] - std::exp(y[i]) * gsum;
                  }
                }
              });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary(
      OpKind::ClampMin, a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw AutodiffError("concat: no operands");
  for (const auto& p : parts) require_defined(p, "concat");
  const auto& first = parts.front();
  const auto rank = first.rank();
  if (rank > 2 || axis >= rank) throw ShapeError("concat", first.shape(), {axis});
  for (const auto& p : parts) {
    bool ok = p.rank() == rank;
    for (std::size_t d = 0; ok && d < rank; ++d) {
      if (d != axis && p.shape()[d] != first.shape()[d]) ok = false;
    }
    if (!ok) throw ShapeError("concat", first.shape(), p.shape());
  }

  std::vector<std::shared_ptr<TensorImpl>> inputs;
  inputs.reserve(parts.size());
  for (const auto& p : parts) inputs.push_back(p.impl());

  if (rank == 1 || axis == 0) {
    // Contiguous blocks laid end to end.
    Shape shape = first.shape();
    shape[0] = 0;
    std::vector<double> out;
    for (const auto& p : parts) {
      shape[0] += p.shape()[0];
      out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return emit(OpKind::Concat, std::move(shape), std::move(out), inputs,
                [inputs](const TensorImpl& o) {
                  std::size_t offset = 0;
                  for (const auto& in : inputs) {
                    const auto len = in->data->size();
                    if (in->requires_grad) {
                      auto& t = grad_target(in);
                      for (std::size_t i = 0; i < len; ++i) t.grad[i] += o.grad[offset + i];
                    }
                    offset += len;
                  }
                });
  }

  const auto n = first.shape()[0];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  std::vector<double> out(n * total);
  std::size_t col0 = 0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    auto src = parts[j].data();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(src.data() + r * widths[j], widths[j], out.data() + r * total + col0);
    }
    col0 += widths[j];
  }
  return emit(OpKind::Concat, {n, total}, std::move(out), inputs,
              [inputs, widths, n, total](const TensorImpl& o) {
                std::size_t c0 = 0;
                for (std::size_t j = 0; j < inputs.size(); ++j) {
                  if (inputs[j]->requires_grad) {
                    auto& t = grad_target(inputs[j]);
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t c = 0; c < widths[j]; ++c) {
                        t.grad[r * widths[j] + c] += o.grad[r * total + c0 + c];
                      }
                    }
                  }
                  c0 += widths[j];
                }
              });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_defined(a, "slice");
  if (a.rank() > 2 || axis >= a.rank() || begin >= end || end > a.shape()[axis]) {
    throw ShapeError("slice", a.shape(), {axis, begin, end});
  }
  auto ai = a.impl();
  auto x = a.data();
  if (a.rank() == 1 || axis == 0) {
    const std::size_t stride = a.rank() == 1 ? 1 : a.shape()[1];
    Shape shape = a.shape();
    shape[0] = end - begin;
    std::vector<double> out(x.begin() + begin * stride, x.begin() + end * stride);
    return emit(OpKind::Slice, std::move(shape), std::move(out), {ai},
                [ai, begin, stride](const TensorImpl& o) {
                  if (!ai->requires_grad) return;
                  auto& t = grad_target(ai);
                  for (std::size_t i = 0; i < o.grad.size(); ++i) {
                    t.grad[begin * stride + i] += o.grad[i];
                  }
                });
  }
  const auto n = a.shape()[0], m = a.shape()[1], w = end - begin;
  std::vector<double> out(n * w);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(x.data() + r * m + begin, w, out.data() + r * w);
  }
  return emit(OpKind::Slice, {n, w}, std::move(out), {ai},
              [ai, n, m, w, begin](const TensorImpl& o) {
                if (!ai->requires_grad) return;
                auto& t = grad_target(ai);
                for (std::size_t r = 0; r < n; ++r) {
                  for (std::size_t c = 0; c < w; ++c) t.grad[r * m + begin + c] += o.grad[r * w + c];
                }
              });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  auto x = a.data();
  double total = 0.0;
  for (double v : x) total += v;
  auto ai = a.impl();
  return emit(OpKind::Sum, {1}, {total}, {ai}, [ai](const TensorImpl& o) {
    if (!ai->requires_grad) return;
    auto& t = grad_target(ai);
    for (auto& g : t.grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  auto x = a.data();
  double total = 0.0;
  for (double v : x) total += v;
  const double n = static_cast<double>(x.size());
  auto ai = a.impl();
  return emit(OpKind::Mean, {1}, {total / n}, {ai}, [ai, n](const TensorImpl& o) {
    if (!ai->requires_grad) return;
    auto& t = grad_target(ai);
    for (auto& g : t.grad) g += o.grad[0] / n;
  });
}

namespace {

Shape norm_shape(const Tensor& a) {
  if (a.rank() == 1) return {1};
  return {a.shape()[0], 1};
}

}  // namespace

Tensor l1_norm(const Tensor& a) {
  require_defined(a, "l1_norm");
  if (a.rank() > 2) throw ShapeError("l1_norm", a.shape(), {});
  const auto n = a.rows(), m = a.cols();
  auto x = a.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r] += std::abs(x[r * m + c]);
  }
  auto ai = a.impl();
  return emit(OpKind::L1Norm, norm_shape(a), std::move(out), {ai}, [ai, n, m](const TensorImpl& o) {
    if (!ai->requires_grad) return;
    auto& t = grad_target(ai);
    const auto& x = *ai->data;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        const double v = x[r * m + c];
        const double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        t.grad[r * m + c] += o.grad[r] * s;
      }
    }
  });
}

Tensor l2_norm(const Tensor& a) {
  require_defined(a, "l2_norm");
  if (a.rank() > 2) throw ShapeError("l2_norm", a.shape(), {});
  const auto n = a.rows(), m = a.cols();
  auto x = a.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < m; ++c) sq += x[r * m + c] * x[r * m + c];
    out[r] = std::sqrt(sq);
  }
  auto ai = a.impl();
  return emit(OpKind::L2Norm, norm_shape(a), std::move(out), {ai}, [ai, n, m](const TensorImpl& o) {
    if (!ai->requires_grad) return;
    auto& t = grad_target(ai);
    const auto& x = *ai->data;
    const auto& y = *o.data;
    for (std::size_t r = 0; r < n; ++r) {
      // Subgradient 0 at the origin.
      if (y[r] == 0.0) continue;
      for (std::size_t c = 0; c < m; ++c) t.grad[r * m + c] += o.grad[r] * x[r * m + c] / y[r];
    }
  });
}

}  // namespace jointgan::ad
