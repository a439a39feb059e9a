#include "jointgan/critic.hpp"

#include <cmath>
#include <string>

#include "jointgan/ops.hpp"

namespace jointgan {

CriticNet::CriticNet(const CriticSpec& spec) : spec_(spec) {
  if (spec.num_classes < 2) throw CriticError("critic needs at least two classes");
  if (spec.input_dim == 0) throw CriticError("critic input dimension must be positive");
  MlpSpec m;
  m.input_dim = spec.input_dim;
  m.hidden = spec.hidden;
  m.output_dim = spec.num_classes;
  m.activation = Activation::LeakyRelu;
  m.leaky_slope = spec.leaky_slope;
  m.zero_init_output = spec.zero_init_output;
  Rng rng(derive_seed(spec.seed, 202));
  net_ = Mlp(m, rng);
}

ad::Tensor CriticNet::logits(std::span<const ad::Tensor> domains, bool frozen) const {
  if (domains.empty()) throw CriticError("critic called with no domains");
  std::size_t width = 0;
  for (const auto& d : domains) {
    if (d.rank() != 2 || d.rows() != domains.front().rows()) {
      throw CriticError("critic input blocks must be [n, d] with a common n, got " +
                        ad::shape_string(d.shape()));
    }
    width += d.cols();
  }
  if (width != spec_.input_dim) {
    throw CriticError("critic input dimension mismatch: expected " + std::to_string(spec_.input_dim) +
                      ", got " + std::to_string(width));
  }
  auto joined = domains.size() == 1 ? domains.front() : ad::concat(domains, 1);
  return net_.forward(joined, frozen);
}

ad::Tensor CriticNet::log_probs(std::span<const ad::Tensor> domains, bool frozen) const {
  return ad::log_softmax(logits(domains, frozen));
}

std::vector<CriticOutput> CriticNet::evaluate(std::span<const ad::Tensor> domains) const {
  ad::NoGradGuard no_grad;
  auto lp = log_probs(domains);
  const auto n = lp.rows(), k = lp.cols();
  std::vector<CriticOutput> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    out[r].probs.resize(k);
    for (std::size_t c = 0; c < k; ++c) out[r].probs[c] = std::exp(lp.at(r, c));
  }
  return out;
}

CriticOutput optimal_critic_oracle(std::span<const double> densities) {
  if (densities.size() < 2) throw CriticError("oracle needs at least two densities");
  double total = 0.0;
  for (double p : densities) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw CriticError("densities must be finite and nonnegative");
    total += p;
  }
  if (total <= 0.0) throw CriticError("all densities are zero at this point");
  CriticOutput out;
  for (double p : densities) out.probs.push_back(p / total);
  return out;
}

CriticOutput optimal_critic_oracle(std::span<const DensityFn> densities,
                                   std::span<const double> point) {
  std::vector<double> values;
  for (const auto& f : densities) values.push_back(f(point));
  return optimal_critic_oracle(values);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw CriticError("total variation of different-length vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace jointgan
