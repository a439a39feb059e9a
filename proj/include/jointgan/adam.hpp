#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jointgan/tensor.hpp"

namespace jointgan::ad {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam moments for one parameter group.
struct AdamState {
  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamOptions options);

  std::size_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  AdamOptions options;
};

/// One Adam update. Every parameter must carry a gradient buffer; gradients
/// are zeroed afterwards.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace jointgan::ad
