#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jointgan/tensor.hpp"

namespace jointgan::ad {

// Rank-2 product [n,k] x [k,m] -> [n,m].
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise sum. `b` may also be a [1,m] or [m] row broadcast over the rows
// of an [n,m] operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);

/// Row-wise over the last axis.
Tensor log_softmax(const Tensor& a);

/// max(a, floor) elementwise; the gradient is zero where the floor is active.
Tensor clamp_min(const Tensor& a, double floor);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);

/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Per-row norms: [n,m] -> [n,1]; a rank-1 input yields shape [1].
Tensor l1_norm(const Tensor& a);
Tensor l2_norm(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

}  // namespace jointgan::ad
