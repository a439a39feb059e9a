#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "jointgan/tensor.hpp"

namespace jointgan::ad {

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates checked per call; all of them when the total is smaller.
  std::size_t max_coordinates = 200;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose central differences at step and step/2 disagree: a
  // relu-style kink lies within the stencil, so no derivative exists to
  // compare against. Smooth coordinates never land here.
  std::size_t skipped_nonsmooth = 0;
};

/// Relative discrepancy |analytic - numeric| / (|analytic| + |numeric| + 1e-12)
/// between backward() and central differences over the sampled parameter
/// coordinates. `loss` must rebuild its graph from the current parameter
/// values on every call and be deterministic. Throws when every sampled
/// coordinate is nonsmooth.
GradCheckReport finite_difference_report(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                         const GradCheckOptions& options = {});

/// finite_difference_report(...).max_relative_error
double finite_difference_check(const std::function<Tensor()>& loss, std::span<Tensor> params,
                               const GradCheckOptions& options = {});

}  // namespace jointgan::ad
