#include "jointgan/gradcheck_suite.hpp"

#include <functional>

#include "jointgan/critic.hpp"
#include "jointgan/dataset.hpp"
#include "jointgan/generators.hpp"
#include "jointgan/gradcheck.hpp"
#include "jointgan/objectives.hpp"
#include "jointgan/ops.hpp"
#include "jointgan/sampling.hpp"
#include "jointgan/synthetic.hpp"

namespace jointgan {

namespace {

using ad::Tensor;

Tensor random_leaf(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  auto t = rng.normal_tensor(r, c);
  for (auto& v : t.data()) v *= scale;
  t.set_requires_grad(true);
  return t;
}

/// sum(out * w) for a fixed w drawn once per case.
std::function<Tensor()> weighted(std::function<Tensor()> f, std::uint64_t seed) {
  Tensor probe;
  {
    ad::NoGradGuard no_grad;
    probe = f();
  }
  Rng rng(seed);
  Tensor w(probe.shape(), std::vector<double>(probe.size()));
  for (auto& v : w.data()) v = rng.normal();
  return [f, w] { return ad::sum(ad::mul(f(), w)); };
}

GradCheckResult check(const std::string& name, std::function<Tensor()> f, std::vector<Tensor> params,
                      std::uint64_t seed, bool scalar = false) {
  auto loss = scalar ? f : weighted(f, derive_seed(seed, 7));
  ad::GradCheckOptions o;
  o.seed = seed;
  const auto r = ad::finite_difference_report(loss, params, o);
  return {name, r.max_relative_error, r.checked, r.skipped_nonsmooth};
}

CriticNet small_critic(std::size_t in, std::size_t k, std::uint64_t seed) {
  CriticSpec s;
  s.input_dim = in;
  s.num_classes = k;
  s.hidden = {8, 8};
  s.seed = seed;
  return CriticNet(s);
}

GeneratorArch small_arch() {
  GeneratorArch a;
  a.hidden = {8, 8};
  return a;
}

}  // namespace

std::vector<GradCheckResult> primitive_gradchecks(std::uint64_t seed) {
  Rng rng(seed);
  auto a = random_leaf(rng, 3, 4), b = random_leaf(rng, 3, 4), m = random_leaf(rng, 4, 2);
  auto row = random_leaf(rng, 1, 4);
  auto vec1 = ad::Tensor::vector({0.3, -1.2, 0.8}, true);
  std::vector<GradCheckResult> out;
  std::uint64_t s = seed;
  out.push_back(check("matmul", [=] { return ad::matmul(a, m); }, {a, m}, ++s));
  out.push_back(check("add", [=] { return ad::add(a, b); }, {a, b}, ++s));
  out.push_back(check("add_broadcast", [=] { return ad::add(a, row); }, {a, row}, ++s));
  out.push_back(check("sub", [=] { return ad::sub(a, b); }, {a, b}, ++s));
  out.push_back(check("mul", [=] { return ad::mul(a, b); }, {a, b}, ++s));
  out.push_back(check("scale", [=] { return ad::scale(a, -1.7); }, {a}, ++s));
  out.push_back(check("tanh", [=] { return ad::tanh(a); }, {a}, ++s));
  out.push_back(check("relu", [=] { return ad::relu(a); }, {a}, ++s));
  out.push_back(check("leaky_relu", [=] { return ad::leaky_relu(a, 0.2); }, {a}, ++s));
  out.push_back(check("sigmoid", [=] { return ad::sigmoid(a); }, {a}, ++s));
  out.push_back(check("exp", [=] { return ad::exp(a); }, {a}, ++s));
  out.push_back(check("log_softmax", [=] { return ad::log_softmax(a); }, {a}, ++s));
  out.push_back(check("clamp_min", [=] { return ad::clamp_min(a, 0.1); }, {a}, ++s));
  out.push_back(check("concat_rows", [=] { return ad::concat({a, b}, 0); }, {a, b}, ++s));
  out.push_back(check("concat_cols", [=] { return ad::concat({a, b}, 1); }, {a, b}, ++s));
  out.push_back(check("slice_rows", [=] { return ad::slice(a, 0, 1, 3); }, {a}, ++s));
  out.push_back(check("slice_cols", [=] { return ad::slice(a, 1, 1, 3); }, {a}, ++s));
  out.push_back(check("sum", [=] { return ad::sum(a); }, {a}, ++s));
  out.push_back(check("mean", [=] { return ad::mean(a); }, {a}, ++s));
  out.push_back(check("l1_norm", [=] { return ad::l1_norm(a); }, {a}, ++s));
  out.push_back(check("l2_norm", [=] { return ad::l2_norm(a); }, {a}, ++s));
  out.push_back(check("l1_norm_rank1", [=] { return ad::l1_norm(ad::Tensor::vector({1.0, -2.0, 0.5}) * vec1); }, {vec1}, ++s));
  out.push_back(check("l2_norm_rank1", [=] { return ad::l2_norm(vec1); }, {vec1}, ++s));
  return out;
}

std::vector<GradCheckResult> objective_gradchecks(std::uint64_t seed) {
  constexpr std::size_t kBatch = 4;
  SyntheticSpec data_spec;
  data_spec.rows = 64;
  const Dataset paired = generate(data_spec, derive_seed(seed, 1));
  const Dataset shuffled = paired.unpaired(derive_seed(seed, 2));
  const TwoDomainView paired_view = PairedView(paired);
  const TwoDomainView unpaired_view = UnpairedView(shuffled);

  BankSpec bs;
  bs.noise_dim_x = bs.noise_dim_y = 2;
  bs.arch = small_arch();
  bs.seed = derive_seed(seed, 3);
  GeneratorBank bank(bs);
  auto gen_params = bank.parameters();

  const auto paired_spec = SourceSpec::for_mode(SourceMode::Paired5);
  const auto unpaired_spec = SourceSpec::for_mode(SourceMode::Unpaired4);
  const auto batch_seed = derive_seed(seed, 4);
  // Fresh Rng per call keeps every evaluation on the same noise and rows.
  auto paired_batches = [&] {
    Rng rng(batch_seed);
    return draw_all(paired_spec, bank, paired_view, kBatch, rng);
  };

  std::vector<GradCheckResult> out;
  std::uint64_t s = derive_seed(seed, 5);

  CriticNet critic5 = small_critic(2, 5, derive_seed(seed, 6));
  out.push_back(check("paired_critic_loss", [&] { return paired_critic_loss(critic5, paired_batches()); },
                      critic5.parameters(), ++s, true));
  for (auto style : {LossStyle::Nonsaturating, LossStyle::Saturating}) {
    out.push_back(check("paired_generator_loss_" + to_string(style),
                        [&, style] { return paired_generator_loss(critic5, paired_batches(), style); },
                        gen_params, ++s, true));
  }

  CriticNet critic4 = small_critic(2, 4, derive_seed(seed, 7));
  auto unpaired = [&](LossStyle style) {
    Rng rng(batch_seed);
    auto batches = draw_all(unpaired_spec, bank, unpaired_view, kBatch, rng);
    return unpaired_losses(critic4, batches, CycleConfig{}, bank, rng, style);
  };
  out.push_back(check("unpaired_critic_loss",
                      [&] {
                        Rng rng(batch_seed);
                        return classification_critic_loss(critic4, draw_all(unpaired_spec, bank, unpaired_view, kBatch, rng));
                      },
                      critic4.parameters(), ++s, true));
  for (auto style : {LossStyle::Saturating, LossStyle::Nonsaturating}) {
    out.push_back(check("unpaired_generator_loss_with_cycle_" + to_string(style),
                        [&, style] { return unpaired(style).generator_loss; }, gen_params, ++s, true));
  }
  for (auto norm : {CycleNorm::L1, CycleNorm::L2}) {
    out.push_back(check("cycle_penalty_" + to_string(norm),
                        [&, norm] {
                          Rng rng(batch_seed);
                          const auto& x = std::get<PairedView>(paired_view).x();
                          const auto& y = std::get<PairedView>(paired_view).y();
                          auto rows = draw_rows(x.rows, kBatch, rng);
                          return cycle_penalty(bank, x.gather(rows), y.gather(rows), norm, rng);
                        },
                        gen_params, ++s, true));
  }

  SyntheticSpec chain_spec;
  chain_spec.family = Family::Chain;
  chain_spec.pairing = Pairing::TwoOverlappingPairs;
  chain_spec.rows = 64;
  chain_spec.noise = 0.3;
  const Dataset chain = generate(chain_spec, derive_seed(seed, 8));
  const OverlappingPairsView chain_view(chain);
  ThreeDomainSpec ts;
  ts.noise_dim = 2;
  ts.arch = small_arch();
  ts.seed = derive_seed(seed, 9);
  ThreeDomainBank tri(ts);
  CriticNet critic6 = small_critic(3, 6, derive_seed(seed, 10));
  auto three = [&](LossStyle style) {
    Rng rng(batch_seed);
    return three_domain_losses(critic6, draw_three_domain_all(tri, chain_view, kBatch, rng), tri, style);
  };
  out.push_back(check("three_domain_critic_loss",
                      [&] {
                        Rng rng(batch_seed);
                        return classification_critic_loss(critic6, draw_three_domain_all(tri, chain_view, kBatch, rng));
                      },
                      critic6.parameters(), ++s, true));
  out.push_back(check("three_domain_generator_loss",
                      [&] { return three(LossStyle::Saturating).generator_loss; }, tri.parameters(), ++s,
                      true));

  CriticNet critic2 = small_critic(1, 2, derive_seed(seed, 11));
  auto gan = [&] {
    Rng rng(batch_seed);
    const auto& x = std::get<PairedView>(paired_view).x();
    std::vector<ad::Tensor> real{x.gather(draw_rows(x.rows, kBatch, rng))};
    std::vector<ad::Tensor> fake{bank.sample_marginal(Domain::X, rng.normal_tensor(kBatch, bs.noise_dim_x))};
    return gan_loss(critic2, real, fake, Phase::Both);
  };
  out.push_back(check("gan_critic_loss", [&] { return gan().critic_loss; }, critic2.parameters(), ++s, true));
  out.push_back(check("gan_generator_loss", [&] { return gan().generator_loss; }, gen_params, ++s, true));

  CriticNet critic_ali = small_critic(2, 2, derive_seed(seed, 12));
  const auto ali_spec = SourceSpec::for_mode(SourceMode::Ali2);
  auto ali = [&] {
    Rng rng(batch_seed);
    auto batches = draw_all(ali_spec, bank, unpaired_view, kBatch, rng);
    return ali_loss(critic_ali, batches[0], batches[1], Phase::Both);
  };
  out.push_back(check("ali_critic_loss", [&] { return ali().critic_loss; }, critic_ali.parameters(), ++s, true));
  out.push_back(check("ali_generator_loss", [&] { return ali().generator_loss; }, gen_params, ++s, true));
  return out;
}

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
  auto out = primitive_gradchecks(seed);
  auto obj = objective_gradchecks(derive_seed(seed, 1000));
  out.insert(out.end(), obj.begin(), obj.end());
  return out;
}

}  // namespace jointgan
