#include <bit>
#include <cmath>

#include <gtest/gtest.h>

#include "jointgan/critic.hpp"
#include "jointgan/generators.hpp"
#include "jointgan/gradcheck.hpp"
#include "jointgan/ops.hpp"

namespace jointgan {
namespace {

using ad::Tensor;

BankSpec small_bank(std::size_t dx = 2, std::size_t dy = 3, std::uint64_t seed = 7) {
  BankSpec s;
  s.dim_x = dx;
  s.dim_y = dy;
  s.noise_dim_x = 4;
  s.noise_dim_y = 5;
  s.arch.hidden = {16, 16};
  s.seed = seed;
  return s;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i])) return false;
  }
  return true;
}

TEST(Coupling, MarginalIsConditionalAtZeroBitExact) {
  GeneratorBank bank(small_bank());
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(8);
    auto ex = rng.normal_tensor(n, 4), ey = rng.normal_tensor(n, 5);
    EXPECT_TRUE(bit_equal(bank.sample_marginal(Domain::X, ex),
                          bank.sample_conditional(Direction::XGivenY, Tensor::zeros({n, 3}), ex)));
    EXPECT_TRUE(bit_equal(bank.sample_marginal(Domain::Y, ey),
                          bank.sample_conditional(Direction::YGivenX, Tensor::zeros({n, 2}), ey)));
  }
}

TEST(Coupling, NoParametersBeyondTheTwoConditionals) {
  GeneratorBank bank(small_bank());
  EXPECT_EQ(bank.parameter_count(), bank.phi().parameter_count() + bank.theta().parameter_count());
  std::size_t counted = 0;
  for (auto& p : bank.parameters()) counted += p.size();
  EXPECT_EQ(counted, bank.parameter_count());
}

TEST(Generators, DeterministicUnderFixedSeeds) {
  GeneratorBank a(small_bank()), b(small_bank());
  Rng r1(5), r2(5);
  EXPECT_TRUE(bit_equal(a.sample_marginal(Domain::X, r1.normal_tensor(6, 4)),
                        b.sample_marginal(Domain::X, r2.normal_tensor(6, 4))));
  Rng r3(8), r4(8);
  auto p = a.sample_joint_chain(ChainOrder::YThenX, r3.normal_tensor(6, 5), r3.normal_tensor(6, 4));
  auto q = b.sample_joint_chain(ChainOrder::YThenX, r4.normal_tensor(6, 5), r4.normal_tensor(6, 4));
  EXPECT_TRUE(bit_equal(p.x, q.x));
  EXPECT_TRUE(bit_equal(p.y, q.y));
}

TEST(Generators, ZeroInitialisedOutputGivesZero) {
  auto spec = small_bank();
  spec.arch.zero_init_output = true;
  GeneratorBank bank(spec);
  Rng rng(2);
  auto x = bank.sample_marginal(Domain::X, rng.normal_tensor(3, 4));
  for (double v : x.data()) EXPECT_EQ(v, 0.0);
}

TEST(Generators, DimensionMismatchIsAnError) {
  GeneratorBank bank(small_bank());
  EXPECT_THROW(bank.sample_marginal(Domain::X, Tensor::zeros({2, 5})), GeneratorError);
  EXPECT_THROW(bank.sample_conditional(Direction::YGivenX, Tensor::zeros({2, 3}), Tensor::zeros({2, 5})),
               GeneratorError);
  EXPECT_THROW(bank.sample_conditional(Direction::YGivenX, Tensor::zeros({2, 2}), Tensor::zeros({3, 5})),
               GeneratorError);
  EXPECT_THROW(bank.sample_marginal(Domain::Z, Tensor::zeros({2, 4})), GeneratorError);
}

TEST(Generators, NoiseChangesTheConditional) {
  GeneratorBank bank(small_bank());
  Rng rng(3);
  auto cond = rng.normal_tensor(1, 2);
  auto a = bank.sample_conditional(Direction::YGivenX, cond, rng.normal_tensor(1, 5));
  auto b = bank.sample_conditional(Direction::YGivenX, cond, rng.normal_tensor(1, 5));
  EXPECT_FALSE(bit_equal(a, b));
}

TEST(Generators, ConditionGradientMatchesFiniteDifferences) {
  GeneratorBank bank(small_bank());
  Rng rng(4);
  auto cond = rng.normal_tensor(3, 2).set_requires_grad(true);
  auto noise = rng.normal_tensor(3, 5);
  auto w = rng.normal_tensor(3, 3);
  std::vector<Tensor> params{cond};
  const double err = ad::finite_difference_check(
      [&] { return ad::sum(ad::mul(bank.sample_conditional(Direction::YGivenX, cond, noise), w)); }, params);
  EXPECT_LT(err, 1e-4);
}

TEST(Chain, FirstElementIsTheMarginal) {
  GeneratorBank bank(small_bank());
  Rng rng(6);
  auto e1 = rng.normal_tensor(4, 4), e2 = rng.normal_tensor(4, 5);
  auto pair = bank.sample_joint_chain(ChainOrder::XThenY, e1, e2);
  EXPECT_TRUE(bit_equal(pair.x, bank.sample_marginal(Domain::X, e1)));
}

double grad_norm(std::vector<Tensor>& params) {
  double s = 0.0;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) s += g * g;
  }
  return std::sqrt(s);
}

TEST(Chain, ConditionalLossReachesTheMarginalNetwork) {
  GeneratorBank bank(small_bank());
  Rng rng(7);
  for (auto& p : bank.parameters()) p.zero_grad();
  auto pair = bank.sample_joint_chain(ChainOrder::XThenY, rng.normal_tensor(4, 4), rng.normal_tensor(4, 5));
  ad::backward(ad::sum(ad::mul(pair.y, pair.y)));
  // phi produced x only; a gradient there flowed through theta's condition.
  EXPECT_GT(grad_norm(bank.phi().parameters()), 0.0);

  for (auto& p : bank.parameters()) p.zero_grad();
  auto cut = bank.sample_joint_chain(ChainOrder::XThenY, rng.normal_tensor(4, 4), rng.normal_tensor(4, 5), true);
  ad::backward(ad::sum(ad::mul(cut.y, cut.y)));
  EXPECT_EQ(grad_norm(bank.phi().parameters()), 0.0);
}

ThreeDomainSpec small_tri() {
  ThreeDomainSpec s;
  s.dim = 2;
  s.noise_dim = 3;
  s.arch.hidden = {8, 8};
  s.seed = 9;
  return s;
}

TEST(ThreeDomain, SkipConnectionInputWidths) {
  ThreeDomainBank bank(small_tri());
  EXPECT_EQ(bank.gamma().spec().input_dim, 2u + 2u + 3u);
  EXPECT_EQ(bank.eta().spec().input_dim, 2u + 2u + 3u);
  EXPECT_EQ(bank.nu().spec().input_dim, 2u + 3u);
  EXPECT_EQ(bank.psi().spec().input_dim, 2u + 3u);
}

TEST(ThreeDomain, FullNoiseChainStartsAtTheCoupledMarginal) {
  ThreeDomainBank bank(small_tri());
  Rng rng(1);
  auto e1 = rng.normal_tensor(5, 3), e2 = rng.normal_tensor(5, 3), e3 = rng.normal_tensor(5, 3);
  auto t = bank.sample_chain(ThreeDomainOrder::XYZ, e1, e2, e3);
  EXPECT_TRUE(bit_equal(t.x, bank.sample_marginal(Domain::X, e1)));
  EXPECT_TRUE(bit_equal(t.x, bank.nu().forward(ad::concat({Tensor::zeros({5, 2}), e1}, 1))));
  auto r = bank.sample_chain(ThreeDomainOrder::ZYX, e1, e2, e3);
  EXPECT_TRUE(bit_equal(r.z, bank.psi().forward(ad::concat({Tensor::zeros({5, 2}), e1}, 1))));
}

TEST(ThreeDomain, ObservedPrefixIsNotConnected) {
  ThreeDomainBank bank(small_tri());
  Rng rng(2);
  auto e = rng.normal_tensor(4, 3);
  ObservedPrefix prefix;
  prefix.x = rng.normal_tensor(4, 2).set_requires_grad(true);
  prefix.y = rng.normal_tensor(4, 2).set_requires_grad(true);
  auto t = bank.sample_chain(ThreeDomainOrder::XYZ, e, e, e, prefix);
  EXPECT_FALSE(t.x.requires_grad());
  EXPECT_FALSE(t.y.requires_grad());
  EXPECT_TRUE(t.z.requires_grad());
}

TEST(ThreeDomain, PrefixMustLeadTheOrder) {
  ThreeDomainBank bank(small_tri());
  Rng rng(3);
  auto e = rng.normal_tensor(4, 3);
  ObservedPrefix y_only;
  y_only.y = rng.normal_tensor(4, 2);
  EXPECT_THROW(bank.sample_chain(ThreeDomainOrder::XYZ, e, e, e, y_only), GeneratorError);
  ObservedPrefix z_in_forward;
  z_in_forward.z = rng.normal_tensor(4, 2);
  EXPECT_THROW(bank.sample_chain(ThreeDomainOrder::XYZ, e, e, e, z_in_forward), GeneratorError);
  EXPECT_NO_THROW(bank.sample_chain(ThreeDomainOrder::ZYX, e, e, e, z_in_forward));
  EXPECT_THROW(bank.sample_marginal(Domain::Y, e), GeneratorError);
}

// Critic ---------------------------------------------------------------------

CriticSpec small_critic(std::size_t k, bool zero_out = false) {
  CriticSpec s;
  s.input_dim = 3;
  s.num_classes = k;
  s.hidden = {8, 8, 8};
  s.zero_init_output = zero_out;
  s.seed = 4;
  return s;
}

TEST(Critic, HeadHasKLogits) {
  for (std::size_t k : {2u, 4u, 5u, 6u}) {
    CriticNet c(small_critic(k));
    Rng rng(1);
    std::vector<Tensor> in{rng.normal_tensor(3, 1), rng.normal_tensor(3, 2)};
    EXPECT_EQ(c.logits(in).cols(), k);
    EXPECT_EQ(c.net().spec().output_dim, k);
  }
}

TEST(Critic, ZeroInitialisedHeadIsUniform) {
  CriticNet c(small_critic(5, true));
  Rng rng(2);
  std::vector<Tensor> in{rng.normal_tensor(4, 3)};
  for (const auto& out : c.evaluate(in)) {
    for (double p : out.probs) EXPECT_NEAR(p, 0.2, 1e-15);
  }
}

TEST(Critic, OutputsAreOpenSimplexPoints) {
  CriticNet c(small_critic(5));
  Rng rng(3);
  auto x = rng.normal_tensor(50, 3);
  for (auto& v : x.data()) v *= 5.0;
  std::vector<Tensor> in{x};
  for (const auto& out : c.evaluate(in)) {
    double total = 0.0;
    for (double p : out.probs) {
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Critic, ShiftingAllLogitsLeavesProbabilities) {
  CriticNet c(small_critic(4));
  Rng rng(4);
  std::vector<Tensor> in{rng.normal_tensor(6, 3)};
  auto logits = c.logits(in);
  auto shifted = ad::add(logits, Tensor::full({1, 4}, 17.5));
  auto a = ad::log_softmax(logits), b = ad::log_softmax(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::exp(a.data()[i]), std::exp(b.data()[i]), 1e-12);
}

TEST(Critic, InputDimensionMismatchIsAnError) {
  CriticNet c(small_critic(5));
  std::vector<Tensor> in{Tensor::zeros({2, 2})};
  EXPECT_ANY_THROW(c.logits(in));
}

TEST(CriticOracle, EqualDensitiesAreUniform) {
  const std::vector<double> d(5, 0.37);
  for (double p : optimal_critic_oracle(d).probs) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(CriticOracle, DegenerateDensity) {
  const std::vector<double> d{1, 0, 0, 0, 0};
  EXPECT_EQ(optimal_critic_oracle(d).probs, (std::vector<double>{1, 0, 0, 0, 0}));
  const std::vector<double> zero(5, 0.0);
  EXPECT_THROW(optimal_critic_oracle(zero), CriticError);
}

/// Grid search over the simplex of the per-point objective sum_k p_k log g_k
/// on a 2-point support: the maximiser must agree with the closed form.
TEST(CriticOracle, MatchesGridSearchMaximiser) {
  const double p[3][2] = {{0.7, 0.3}, {0.2, 0.8}, {0.5, 0.5}};
  for (int point = 0; point < 2; ++point) {
    double best = -1e300, bg0 = 0, bg1 = 0;
    const int steps = 1000;
    for (int i = 1; i < steps; ++i) {
      for (int j = 1; i + j < steps; ++j) {
        const double g0 = double(i) / steps, g1 = double(j) / steps, g2 = 1 - g0 - g1;
        const double v = p[0][point] * std::log(g0) + p[1][point] * std::log(g1) + p[2][point] * std::log(g2);
        if (v > best) best = v, bg0 = g0, bg1 = g1;
      }
    }
    const std::vector<double> d{p[0][point], p[1][point], p[2][point]};
    auto out = optimal_critic_oracle(d);
    EXPECT_NEAR(out.probs[0], bg0, 1e-3);
    EXPECT_NEAR(out.probs[1], bg1, 1e-3);
  }
}

TEST(CriticOracle, DensityFunctions) {
  std::vector<DensityFn> fns{[](std::span<const double> x) { return std::exp(-x[0] * x[0]); },
                             [](std::span<const double> x) { return std::exp(-(x[0] - 1) * (x[0] - 1)); }};
  const std::vector<double> point{0.5};
  auto out = optimal_critic_oracle(fns, point);
  EXPECT_NEAR(out.probs[0], 0.5, 1e-15);
}

TEST(TotalVariation, HalfL1) {
  const std::vector<double> a{0.5, 0.5, 0}, b{0, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(total_variation(a, b), 0.5);
}

}  // namespace
}  // namespace jointgan
