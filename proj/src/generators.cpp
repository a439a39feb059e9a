#include "jointgan/generators.hpp"

#include "jointgan/ops.hpp"

namespace jointgan {

namespace {

void check_block(const ad::Tensor& t, std::size_t dim, const char* what) {
  if (!t.defined() || t.rank() != 2 || t.cols() != dim) {
    throw GeneratorError(std::string(what) + " dimension mismatch: expected [n," + std::to_string(dim) +
                         "], got " + (t.defined() ? ad::shape_string(t.shape()) : "undefined"));
  }
}

void check_rows(const ad::Tensor& a, const ad::Tensor& b) {
  if (a.rows() != b.rows()) {
    throw GeneratorError("batch size mismatch: " + ad::shape_string(a.shape()) + " vs " +
                         ad::shape_string(b.shape()));
  }
}

MlpSpec conditional_spec(std::size_t in, std::size_t out, const GeneratorArch& arch) {
  MlpSpec s;
  s.input_dim = in;
  s.output_dim = out;
  s.hidden = arch.hidden;
  s.activation = arch.activation;
  s.leaky_slope = arch.leaky_slope;
  s.zero_init_output = arch.zero_init_output;
  return s;
}

}  // namespace

std::string to_string(Domain d) {
  switch (d) {
    case Domain::X: return "x";
    case Domain::Y: return "y";
    case Domain::Z: return "z";
  }
  return "?";
}

GeneratorBank::GeneratorBank(const BankSpec& spec) : spec_(spec) {
  if (spec.dim_x == 0 || spec.dim_y == 0 || spec.noise_dim_x == 0 || spec.noise_dim_y == 0) {
    throw GeneratorError("generator bank dimensions must be positive");
  }
  Rng rng(derive_seed(spec.seed, 101));
  phi_ = Mlp(conditional_spec(spec.dim_y + spec.noise_dim_x, spec.dim_x, spec.arch), rng);
  theta_ = Mlp(conditional_spec(spec.dim_x + spec.noise_dim_y, spec.dim_y, spec.arch), rng);
}

std::size_t GeneratorBank::noise_dim(Domain produced) const {
  return produced == Domain::X ? spec_.noise_dim_x : spec_.noise_dim_y;
}

std::size_t GeneratorBank::domain_dim(Domain d) const {
  return d == Domain::X ? spec_.dim_x : spec_.dim_y;
}

ad::Tensor GeneratorBank::sample_conditional(Direction direction, const ad::Tensor& condition,
                                             const ad::Tensor& noise, bool frozen) const {
  const bool to_y = direction == Direction::YGivenX;
  check_block(condition, to_y ? spec_.dim_x : spec_.dim_y, "condition");
  check_block(noise, to_y ? spec_.noise_dim_y : spec_.noise_dim_x, "noise");
  check_rows(condition, noise);
  const Mlp& net = to_y ? theta_ : phi_;
  return net.forward(ad::concat({condition, noise}, 1), frozen);
}

ad::Tensor GeneratorBank::sample_marginal(Domain domain, const ad::Tensor& noise, bool frozen) const {
  if (domain == Domain::Z) throw GeneratorError("two-domain bank has no z domain");
  const bool x = domain == Domain::X;
  check_block(noise, x ? spec_.noise_dim_x : spec_.noise_dim_y, "noise");
  auto zero = ad::Tensor::zeros({noise.rows(), x ? spec_.dim_y : spec_.dim_x});
  return sample_conditional(x ? Direction::XGivenY : Direction::YGivenX, zero, noise, frozen);
}

XYPair GeneratorBank::sample_joint_chain(ChainOrder order, const ad::Tensor& first_noise,
                                         const ad::Tensor& second_noise, bool detach_condition) const {
  if (order == ChainOrder::XThenY) {
    auto x = sample_marginal(Domain::X, first_noise);
    auto cond = detach_condition ? x.detach() : x;
    auto y = sample_conditional(Direction::YGivenX, cond, second_noise);
    return {x, y};
  }
  auto y = sample_marginal(Domain::Y, first_noise);
  auto cond = detach_condition ? y.detach() : y;
  auto x = sample_conditional(Direction::XGivenY, cond, second_noise);
  return {x, y};
}

std::vector<ad::Tensor> GeneratorBank::parameters() {
  auto out = phi_.parameters();
  out.insert(out.end(), theta_.parameters().begin(), theta_.parameters().end());
  return out;
}

std::vector<std::pair<std::string, ad::Tensor>> GeneratorBank::named_parameters() const {
  auto out = phi_.named_parameters("phi");
  auto t = theta_.named_parameters("theta");
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::size_t GeneratorBank::parameter_count() const {
  return phi_.parameter_count() + theta_.parameter_count();
}

void GeneratorBank::set_trainable(bool on) {
  phi_.set_trainable(on);
  theta_.set_trainable(on);
}

ThreeDomainBank::ThreeDomainBank(const ThreeDomainSpec& spec) : spec_(spec) {
  if (spec.dim == 0 || spec.noise_dim == 0) {
    throw GeneratorError("three-domain bank dimensions must be positive");
  }
  Rng rng(derive_seed(spec.seed, 103));
  const auto d = spec.dim, e = spec.noise_dim;
  nu_ = Mlp(conditional_spec(d + e, d, spec.arch), rng);
  gamma_ = Mlp(conditional_spec(2 * d + e, d, spec.arch), rng);
  psi_ = Mlp(conditional_spec(d + e, d, spec.arch), rng);
  eta_ = Mlp(conditional_spec(2 * d + e, d, spec.arch), rng);
}

ad::Tensor ThreeDomainBank::sample_marginal(Domain domain, const ad::Tensor& noise, bool frozen) const {
  check_block(noise, spec_.noise_dim, "noise");
  auto zero = ad::Tensor::zeros({noise.rows(), spec_.dim});
  switch (domain) {
    case Domain::X: return nu_.forward(ad::concat({zero, noise}, 1), frozen);
    case Domain::Z: return psi_.forward(ad::concat({zero, noise}, 1), frozen);
    case Domain::Y: break;
  }
  throw GeneratorError("three-domain bank has no marginal generator for y");
}

XYZTriple ThreeDomainBank::sample_chain(ThreeDomainOrder order, const ad::Tensor& noise1,
                                        const ad::Tensor& noise2, const ad::Tensor& noise3,
                                        const ObservedPrefix& prefix, bool frozen) const {
  const bool forward = order == ThreeDomainOrder::XYZ;
  const auto& first = forward ? prefix.x : prefix.z;
  const auto& second = prefix.y;
  const auto& last = forward ? prefix.z : prefix.x;
  if (last || (second && !first)) {
    throw GeneratorError(std::string("observed domains are not a leading prefix of order ") +
                         (forward ? "x,y,z" : "z,y,x"));
  }
  for (const auto* t : {&first, &second}) {
    if (*t) check_block(**t, spec_.dim, "observed domain");
  }
  if (first && second) check_rows(*first, *second);

  const Domain lead = forward ? Domain::X : Domain::Z;
  ad::Tensor a = first ? first->detach() : sample_marginal(lead, noise1, frozen);
  ad::Tensor b;
  if (second) {
    b = second->detach();
  } else {
    check_block(noise2, spec_.noise_dim, "noise");
    check_rows(a, noise2);
    const Mlp& mid = forward ? nu_ : psi_;
    b = mid.forward(ad::concat({a, noise2}, 1), frozen);
  }
  check_block(noise3, spec_.noise_dim, "noise");
  check_rows(a, noise3);
  const Mlp& tail = forward ? gamma_ : eta_;
  // gamma(z | x, y) and eta(x | y, z): inputs ordered by domain name.
  ad::Tensor c = forward ? tail.forward(ad::concat({a, b, noise3}, 1), frozen)
                         : tail.forward(ad::concat({b, a, noise3}, 1), frozen);
  if (forward) return {a, b, c};
  return {c, b, a};
}

std::vector<ad::Tensor> ThreeDomainBank::parameters() {
  std::vector<ad::Tensor> out;
  for (Mlp* m : {&nu_, &gamma_, &psi_, &eta_}) {
    out.insert(out.end(), m->parameters().begin(), m->parameters().end());
  }
  return out;
}

std::vector<std::pair<std::string, ad::Tensor>> ThreeDomainBank::named_parameters() const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  const std::pair<const char*, const Mlp*> nets[] = {{"nu", &nu_}, {"gamma", &gamma_}, {"psi", &psi_}, {"eta", &eta_}};
  for (auto [name, m] : nets) {
    auto p = m->named_parameters(name);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t ThreeDomainBank::parameter_count() const {
  return nu_.parameter_count() + gamma_.parameter_count() + psi_.parameter_count() +
         eta_.parameter_count();
}

void ThreeDomainBank::set_trainable(bool on) {
  for (Mlp* m : {&nu_, &gamma_, &psi_, &eta_}) m->set_trainable(on);
}

}  // namespace jointgan
