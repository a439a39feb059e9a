#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "jointgan/eval.hpp"

namespace jointgan {
namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  auto m = Matrix::from_tensor(rng.normal_tensor(rows, cols));
  for (auto& v : m.values) v += shift;
  return m;
}

double sqdist(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols; ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return s;
}

/// Direct transcription of the unbiased estimator.
double mmd2_oracle(const Matrix& a, const Matrix& b, const std::vector<double>& bw) {
  auto k = [&](const Matrix& u, std::size_t i, const Matrix& v, std::size_t j) {
    double s = 0.0;
    for (double h : bw) s += std::exp(-sqdist(u, i, v, j) / (2 * h * h));
    return s;
  };
  const double n = a.rows, m = b.rows;
  double aa = 0, bb = 0, ab = 0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.rows; ++j)
      if (i != j) aa += k(a, i, a, j);
  for (std::size_t i = 0; i < b.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j)
      if (i != j) bb += k(b, i, b, j);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) ab += k(a, i, b, j);
  return aa / (n * (n - 1)) + bb / (m * (m - 1)) - 2 * ab / (n * m);
}

double energy_oracle(const Matrix& a, const Matrix& b) {
  auto mean_dist = [](const Matrix& u, const Matrix& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.rows; ++i)
      for (std::size_t j = 0; j < v.rows; ++j) s += std::sqrt(sqdist(u, i, v, j));
    return s / (static_cast<double>(u.rows) * v.rows);
  };
  return 2 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

TEST(Mmd, MatchesTheDirectEstimator) {
  const std::vector<double> bw{0.5, 1.0, 2.0};
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto a = random_matrix(17, 2, seed), b = random_matrix(23, 2, seed + 100, 0.3 * seed);
    EXPECT_NEAR(mmd2(a, b, bw), mmd2_oracle(a, b, bw), 1e-12);
  }
}

TEST(Mmd, SeparatesShiftedSamplesAndNeedsTwoRows) {
  const std::vector<double> bw{1.0};
  auto a = random_matrix(300, 1, 1), b = random_matrix(300, 1, 2), c = random_matrix(300, 1, 3, 1.0);
  EXPECT_LT(std::abs(mmd2(a, b, bw)), 0.02);
  EXPECT_GT(mmd2(a, c, bw), 0.1);
  EXPECT_THROW(mmd2(random_matrix(1, 1, 1), b, bw), EvalError);
}

TEST(Bandwidths, MedianHeuristic) {
  Matrix m(3, 1);
  m.values = {0.0, 1.0, 3.0};  // pairwise distances 1, 2, 3
  auto bw = median_bandwidths(m);
  ASSERT_EQ(bw.size(), 3u);
  EXPECT_DOUBLE_EQ(bw[1], 2.0);
  EXPECT_DOUBLE_EQ(bw[0], 1.0);
  EXPECT_DOUBLE_EQ(bw[2], 4.0);
}

TEST(Energy, MatchesOracleAndIsNonnegative) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto a = random_matrix(20, 2, seed), b = random_matrix(15, 2, seed + 50, 0.2 * seed);
    const double e = energy_distance(a, b);
    EXPECT_NEAR(e, energy_oracle(a, b), 1e-12);
    EXPECT_GE(e, -1e-12);
  }
  auto a = random_matrix(10, 1, 1);
  EXPECT_NEAR(energy_distance(a, a), 0.0, 1e-12);
}

TEST(PermutationNull, SortedReproducibleAndCentred) {
  const auto pool = random_matrix(200, 1, 4);
  const std::vector<double> bw{1.0};
  auto a = mmd2_permutation_null(pool, 100, 50, bw, 9);
  auto b = mmd2_permutation_null(pool, 100, 50, bw, 9);
  ASSERT_EQ(a.size(), 50u);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_LT(std::abs(quantile(a, 0.5)), 0.02);
  EXPECT_THROW(mmd2_permutation_null(pool, 101, 5, bw, 9), EvalError);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.99), 4.96);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 5.0);
}

TEST(Procrustes, RecoversAKnownRotation) {
  auto b = random_matrix(50, 2, 7);
  const double t = 0.6;
  const double r[4] = {std::cos(t), -std::sin(t), std::sin(t), std::cos(t)};
  Matrix a(50, 2);
  for (std::size_t i = 0; i < 50; ++i) {
    a(i, 0) = r[0] * b(i, 0) + r[1] * b(i, 1);
    a(i, 1) = r[2] * b(i, 0) + r[3] * b(i, 1);
  }
  auto q = procrustes_rotation(a, b);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(q[i], r[i], 1e-9);
}

GeneratorBank linear_bank(double slope) {
  BankSpec b;
  b.noise_dim_x = b.noise_dim_y = 1;
  b.arch.hidden = {};
  b.arch.activation = Activation::Identity;
  GeneratorBank bank(b);
  for (Mlp* m : {&bank.phi(), &bank.theta()}) {
    auto& p = m->parameters();
    p[0].data()[0] = m == &bank.theta() ? slope : 1.0 / slope;
    p[0].data()[1] = 0.0;
    p[1].data()[0] = 0.0;
  }
  return bank;
}

TEST(ConditionalConsistency, OracleGeneratorScoresZero) {
  SyntheticSpec s;
  s.family = Family::DeterministicMap;
  s.map_scale = 2.0;
  EXPECT_NEAR(conditional_consistency(linear_bank(2.0), s, 500, 1), 0.0, 1e-12);
  EXPECT_NEAR(cycle_error(linear_bank(2.0), random_matrix(20, 1, 1), random_matrix(20, 1, 2), 3), 0.0, 1e-12);
  BankSpec random;
  random.seed = 4;
  EXPECT_GT(conditional_consistency(GeneratorBank(random), s, 500, 1), 0.5);
  SyntheticSpec gaussian;
  EXPECT_THROW(conditional_consistency(linear_bank(2.0), gaussian, 10, 1), EvalError);
}

TEST(ConditionalConsistency, SymmetricRmseForgivesAReflection) {
  SyntheticSpec s;
  s.family = Family::DeterministicMap;
  s.map_scale = 2.0;
  EXPECT_GT(conditional_consistency(linear_bank(-2.0), s, 500, 1), 1.0);
  EXPECT_NEAR(symmetric_rmse(linear_bank(-2.0), s, 500, 1), 0.0, 1e-9);
}

TEST(Confusion, UniformCriticGivesUniformRows) {
  CriticSpec c;
  c.hidden = {4};
  c.zero_init_output = true;
  CriticNet critic(c);
  SyntheticSpec s;
  s.rows = 100;
  auto data = generate(s, 1);
  BankSpec b;
  b.arch.hidden = {4};
  auto m = critic_confusion(critic, SourceSpec::for_mode(SourceMode::Paired5), GeneratorBank(b),
                            PairedView(data), 20, 1);
  ASSERT_EQ(m.size(), 5u);
  for (const auto& row : m) {
    ASSERT_EQ(row.size(), 5u);
    for (double v : row) EXPECT_NEAR(v, 0.2, 1e-12);
  }
}

TEST(EquilibriumOracle, IdenticalDistributionsSitAtTheEquilibrium) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  auto r = proposition1_discrete_oracle({p, p, p, p, p});
  EXPECT_NEAR(r.objective, 5 * std::log(0.2), 1e-12);
  EXPECT_NEAR(r.equilibrium, 5 * std::log(0.2), 1e-12);
  EXPECT_NEAR(r.excess, 0.0, 1e-12);
  EXPECT_TRUE(r.is_equilibrium);
  EXPECT_EQ(r.max_total_variation, 0.0);
}

TEST(EquilibriumOracle, DisjointSupportsReachTheUpperBound) {
  auto r = proposition1_discrete_oracle({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
  EXPECT_NEAR(r.excess, 3 * std::log(3.0), 1e-12);
  EXPECT_FALSE(r.is_equilibrium);
  EXPECT_DOUBLE_EQ(r.max_total_variation, 1.0);
}

/// Any mismatch lifts the objective strictly above K ln(1/K).
TEST(EquilibriumOracle, ExcessIsPositiveOffTheEquilibrium) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> d(4, std::vector<double>(6));
    for (auto& row : d) {
      double s = 0;
      for (auto& v : row) s += (v = std::exp(rng.normal()));
      for (auto& v : row) v /= s;
    }
    auto r = proposition1_discrete_oracle(d);
    EXPECT_GT(r.excess, 0.0);
    EXPECT_FALSE(r.is_equilibrium);
    EXPECT_NEAR(r.objective - r.equilibrium, r.excess, 1e-9);
  }
  EXPECT_THROW(proposition1_discrete_oracle({{0.5, 0.6}, {0.5, 0.5}}), EvalError);
}

}  // namespace
}  // namespace jointgan
