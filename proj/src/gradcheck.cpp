#include "jointgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "jointgan/rng.hpp"

namespace jointgan::ad {

namespace {

double evaluate(const std::function<Tensor()>& loss) {
  NoGradGuard no_grad;
  const double value = loss().item();
  if (!std::isfinite(value)) throw AutodiffError("gradcheck: loss is not finite");
  return value;
}

}  // namespace

GradCheckReport finite_difference_report(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                         const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw AutodiffError("gradcheck: step must be positive");

  for (auto& p : params) p.zero_grad();
  Tensor root = loss();
  if (!std::isfinite(root.item())) throw AutodiffError("gradcheck: loss is not finite");
  backward(root);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) coords.emplace_back(i, j);
  }
  if (coords.size() > options.max_coordinates) {
    Rng rng(options.seed);
    // Partial Fisher-Yates: the first max_coordinates entries form the sample.
    for (std::size_t k = 0; k < options.max_coordinates; ++k) {
      std::swap(coords[k], coords[k + rng.index(coords.size() - k)]);
    }
    coords.resize(options.max_coordinates);
  }

  GradCheckReport report;
  const double h = options.step;
  const double f0 = std::abs(root.item());
  auto central = [&](std::span<double> values, std::size_t j, double step) {
    const double original = values[j];
    values[j] = original + step;
    const double up = evaluate(loss);
    values[j] = original - step;
    const double down = evaluate(loss);
    values[j] = original;
    return (up - down) / (2.0 * step);
  };
  for (auto [i, j] : coords) {
    auto values = params[i].data();
    const double wide = central(values, j, h);
    const double narrow = central(values, j, 0.5 * h);
    // Smooth: the two estimates differ by O(h^2) plus rounding of order
    // eps |f| / h. A kink inside the stencil shifts them by O(1) slope jumps.
    const double rounding = 1e3 * 2.2e-16 * (f0 + 1.0) / h;
    if (std::abs(wide - narrow) > 1e-6 * (std::abs(wide) + std::abs(narrow)) + rounding) {
      ++report.skipped_nonsmooth;
      continue;
    }
    const double analytic = params[i].grad()[j];
    const double err = std::abs(analytic - narrow) / (std::abs(analytic) + std::abs(narrow) + 1e-12);
    report.max_relative_error = std::max(report.max_relative_error, err);
    ++report.checked;
  }
  for (auto& p : params) p.zero_grad();
  if (report.checked == 0 && !coords.empty()) {
    throw AutodiffError("gradcheck: every sampled coordinate straddles a nondifferentiable point");
  }
  return report;
}

double finite_difference_check(const std::function<Tensor()>& loss, std::span<Tensor> params,
                               const GradCheckOptions& options) {
  return finite_difference_report(loss, params, options).max_relative_error;
}

}  // namespace jointgan::ad
