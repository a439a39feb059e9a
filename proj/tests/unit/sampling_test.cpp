#include <gtest/gtest.h>

#include "jointgan/sampling.hpp"
#include "jointgan/synthetic.hpp"

namespace jointgan {
namespace {

using D = Domain;

struct Fixture : ::testing::Test {
  Dataset paired;
  Dataset shuffled;
  Dataset chain;
  GeneratorBank bank;
  ThreeDomainBank tri;

  void SetUp() override {
    SyntheticSpec s;
    s.rows = 200;
    paired = generate(s, 1);
    shuffled = paired.unpaired(2);
    SyntheticSpec c;
    c.family = Family::Chain;
    c.pairing = Pairing::TwoOverlappingPairs;
    c.rows = 200;
    c.noise = 0.3;
    chain = generate(c, 3);
    BankSpec b;
    b.noise_dim_x = b.noise_dim_y = 3;
    b.arch.hidden = {8};
    bank = GeneratorBank(b);
    ThreeDomainSpec t;
    t.noise_dim = 3;
    t.arch.hidden = {8};
    tri = ThreeDomainBank(t);
  }
};

struct Expect {
  std::size_t k;
  const char* text;
  std::vector<bool> empirical;  // per domain, domain order
};

void audit(const SourceSpec& spec, const std::vector<Expect>& table, std::size_t domains) {
  ASSERT_EQ(spec.num_classes(), table.size());
  for (const auto& e : table) {
    const auto& r = spec.source(e.k);
    EXPECT_EQ(r.k, e.k);
    EXPECT_EQ(r.text, e.text);
    EXPECT_EQ(spec.find(e.text), e.k);
    for (std::size_t d = 0; d < domains; ++d) {
      EXPECT_EQ(r.is_empirical(static_cast<D>(d)), e.empirical[d]) << e.text << " domain " << d;
    }
  }
}

TEST(Recipes, PairedFiveMatchTheDefinitions) {
  audit(SourceSpec::for_mode(SourceMode::Paired5),
        {{1, "q(x)p_theta(y|x)", {true, false}},
         {2, "q(y)p_phi(x|y)", {false, true}},
         {3, "p_alpha(x)p_theta(y|x)", {false, false}},
         {4, "p_beta(y)p_phi(x|y)", {false, false}},
         {5, "q(x,y)", {true, true}}},
        2);
  const auto spec = SourceSpec::for_mode(SourceMode::Paired5);
  EXPECT_EQ(spec.source(3).factor(D::Y).given, (std::vector<D>{D::X}));
  EXPECT_EQ(spec.source(4).factor(D::X).given, (std::vector<D>{D::Y}));
  EXPECT_EQ(spec.source(5).factor(D::X).table, "xy");
  EXPECT_EQ(spec.source(5).factor(D::Y).table, "xy");
}

TEST(Recipes, UnpairedFourDropTheEmpiricalJoint) {
  audit(SourceSpec::for_mode(SourceMode::Unpaired4),
        {{1, "q(x)p_theta(y|x)", {true, false}},
         {2, "q(y)p_phi(x|y)", {false, true}},
         {3, "p_alpha(x)p_theta(y|x)", {false, false}},
         {4, "p_beta(y)p_phi(x|y)", {false, false}}},
        2);
  const auto spec = SourceSpec::for_mode(SourceMode::Unpaired4);
  EXPECT_THROW(spec.source(5), SamplingError);
  EXPECT_THROW(spec.find("q(x,y)"), SamplingError);
}

TEST(Recipes, ThreeDomainSixMatchTheDefinitions) {
  audit(SourceSpec::for_mode(SourceMode::ThreeDomain6),
        {{1, "p_alpha(x)p_nu(y|x)p_gamma(z|x,y)", {false, false, false}},
         {2, "p_beta(z)p_psi(y|z)p_eta(x|y,z)", {false, false, false}},
         {3, "q(x)p_nu(y|x)p_gamma(z|x,y)", {true, false, false}},
         {4, "q(z)p_psi(y|z)p_eta(x|y,z)", {false, false, true}},
         {5, "q(x,y)p_gamma(z|x,y)", {true, true, false}},
         {6, "q(y,z)p_eta(x|y,z)", {false, true, true}}},
        3);
  const auto spec = SourceSpec::for_mode(SourceMode::ThreeDomain6);
  EXPECT_EQ(spec.source(5).factor(D::Z).given, (std::vector<D>{D::X, D::Y}));
  EXPECT_EQ(spec.source(6).factor(D::X).given, (std::vector<D>{D::Y, D::Z}));
}

TEST(Recipes, ThreeDomainNeverOffersUnobservedTables) {
  const auto spec = SourceSpec::for_mode(SourceMode::ThreeDomain6);
  EXPECT_THROW(spec.find("q(x,z)"), SamplingError);
  EXPECT_THROW(spec.find("q(x,y,z)"), SamplingError);
  EXPECT_THROW(spec.find("q(x,z)p_nu(y|x)"), SamplingError);
  try {
    spec.find("q(x)p_psi(z|y)");
    FAIL();
  } catch (const SamplingError& e) {
    EXPECT_NE(std::string(e.what()).find("malformed"), std::string::npos);
  }
}

TEST(Recipes, FindIgnoresWhitespace) {
  EXPECT_EQ(SourceSpec::for_mode(SourceMode::Paired5).find(" q(x) p_theta(y|x) "), 1u);
}

TEST_F(Fixture, PairedSourceConnectivity) {
  const auto spec = SourceSpec::for_mode(SourceMode::Paired5);
  const TwoDomainView view = PairedView(paired);
  Rng rng(1);
  auto b5 = draw_batch(spec, 5, bank, view, 8, rng);
  EXPECT_EQ(b5.graph_connected, (std::vector<bool>{false, false}));
  auto b3 = draw_batch(spec, 3, bank, view, 8, rng);
  EXPECT_EQ(b3.graph_connected, (std::vector<bool>{true, true}));
  EXPECT_TRUE(b3.values[0].requires_grad());
  auto b1 = draw_batch(spec, 1, bank, view, 8, rng);
  EXPECT_EQ(b1.graph_connected, (std::vector<bool>{false, true}));
  EXPECT_FALSE(b1.values[0].requires_grad());
  EXPECT_EQ(b1.source, 1u);
  EXPECT_EQ(b1.rows(), 8u);
}

/// Empirical components are exact dataset rows, and q(x,y) keeps pairs.
TEST_F(Fixture, EmpiricalDrawsAreDatasetRows) {
  const auto spec = SourceSpec::for_mode(SourceMode::Paired5);
  const PairedView pv(paired);
  const TwoDomainView view = pv;
  Rng rng(2);
  auto b5 = draw_batch(spec, 5, bank, view, 50, rng);
  for (std::size_t i = 0; i < 50; ++i) {
    bool found = false;
    for (std::size_t r = 0; r < pv.rows() && !found; ++r) {
      found = pv.x()(r, 0) == b5.values[0].at(i, 0) && pv.y()(r, 0) == b5.values[1].at(i, 0);
    }
    EXPECT_TRUE(found) << "row " << i << " is not a dataset pair";
  }
}

TEST_F(Fixture, UnpairedModeRefusesTheJointSourceAndPairedViews) {
  const auto spec = SourceSpec::for_mode(SourceMode::Unpaired4);
  const TwoDomainView unpaired = UnpairedView(shuffled);
  const TwoDomainView pairedv = PairedView(paired);
  Rng rng(3);
  try {
    draw_batch(spec, 5, bank, unpaired, 4, rng);
    FAIL();
  } catch (const SamplingError& e) {
    EXPECT_NE(std::string(e.what()).find("q(x,y)"), std::string::npos);
  }
  EXPECT_THROW(draw_batch(spec, 1, bank, pairedv, 4, rng), SamplingError);
  const auto paired_spec = SourceSpec::for_mode(SourceMode::Paired5);
  EXPECT_THROW(draw_batch(paired_spec, 5, bank, unpaired, 4, rng), SamplingError);
  EXPECT_NO_THROW(draw_all(spec, bank, unpaired, 4, rng));
}

TEST_F(Fixture, DetachedChainCutsOnlyTheConditioningPath) {
  const auto spec = SourceSpec::for_mode(SourceMode::Paired5);
  const TwoDomainView view = PairedView(paired);
  Rng rng(4);
  auto b = draw_batch(spec, 3, bank, view, 4, rng, true);
  EXPECT_TRUE(b.values[0].requires_grad());
  EXPECT_TRUE(b.values[1].requires_grad());
}

TEST_F(Fixture, NoGraphUnderNoGrad) {
  const auto spec = SourceSpec::for_mode(SourceMode::Paired5);
  const TwoDomainView view = PairedView(paired);
  Rng rng(5);
  ad::NoGradGuard guard;
  for (const auto& b : draw_all(spec, bank, view, 4, rng)) {
    for (bool c : b.graph_connected) EXPECT_FALSE(c);
  }
}

TEST_F(Fixture, ThreeDomainConnectivity) {
  const OverlappingPairsView view(chain);
  Rng rng(6);
  auto all = draw_three_domain_all(tri, view, 5, rng);
  ASSERT_EQ(all.size(), 6u);
  EXPECT_EQ(all[0].graph_connected, (std::vector<bool>{true, true, true}));
  EXPECT_EQ(all[4].graph_connected, (std::vector<bool>{false, false, true}));
  EXPECT_EQ(all[5].graph_connected, (std::vector<bool>{true, false, false}));
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(all[k].source, k + 1);
}

TEST_F(Fixture, SamplingIsDeterministic) {
  const auto spec = SourceSpec::for_mode(SourceMode::Paired5);
  const TwoDomainView view = PairedView(paired);
  Rng a(9), b(9);
  auto x = draw_all(spec, bank, view, 6, a);
  auto y = draw_all(spec, bank, view, 6, b);
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (std::size_t d = 0; d < 2; ++d) {
      EXPECT_EQ(std::vector<double>(x[k].values[d].data().begin(), x[k].values[d].data().end()),
                std::vector<double>(y[k].values[d].data().begin(), y[k].values[d].data().end()));
    }
  }
}

TEST(DrawRows, WithinRange) {
  Rng rng(1);
  for (auto r : draw_rows(7, 1000, rng)) EXPECT_LT(r, 7u);
  EXPECT_THROW(draw_rows(0, 3, rng), SamplingError);
}

}  // namespace
}  // namespace jointgan
