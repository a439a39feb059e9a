#include "jointgan/adam.hpp"

#include <cmath>
#include <string>

namespace jointgan::ad {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions opts) : options(opts) {
  if (!(opts.learning_rate >= 0.0) || !(opts.beta1 >= 0.0 && opts.beta1 < 1.0) ||
      !(opts.beta2 >= 0.0 && opts.beta2 < 1.0) || !(opts.epsilon > 0.0)) {
    throw AutodiffError("adam: invalid hyperparameters");
  }
  for (const auto& p : params) {
    first_moment.emplace_back(p.size(), 0.0);
    second_moment.emplace_back(p.size(), 0.0);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw AutodiffError("adam: state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw AutodiffError("adam: parameter " + std::to_string(i) + " has no gradient");
    }
    if (params[i].size() != state.first_moment[i].size()) {
      throw ShapeError("adam", params[i].shape(), {state.first_moment[i].size()});
    }
  }

  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
      grad[j] = 0.0;
    }
  }
}

}  // namespace jointgan::ad
