#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include <gtest/gtest.h>

#include "jointgan/adam.hpp"
#include "jointgan/gradcheck.hpp"
#include "jointgan/mlp.hpp"
#include "jointgan/ops.hpp"
#include "jointgan/rng.hpp"

namespace jointgan {
namespace {

using ad::Tensor;

Tensor leaf(std::vector<double> v, ad::Shape shape) {
  return Tensor(std::move(shape), std::move(v), true);
}

TEST(Forward, MatmulByHand) {
  auto a = Tensor::matrix({{1, 2}, {3, 4}});
  auto b = Tensor::matrix({{1}, {1}});
  auto c = ad::matmul(a, b);
  EXPECT_EQ(c.shape(), (ad::Shape{2, 1}));
  EXPECT_EQ(c.at(0, 0), 3.0);
  EXPECT_EQ(c.at(1, 0), 7.0);
}

TEST(Forward, LogSoftmaxOfUniformLogits) {
  auto z = ad::log_softmax(Tensor::vector({0, 0, 0, 0, 0}));
  for (double v : z.data()) EXPECT_NEAR(v, -std::log(5.0), 1e-15);
}

TEST(Forward, ConcatVectors) {
  auto c = ad::concat({Tensor::vector({1, 2}), Tensor::vector({3})}, 0);
  EXPECT_EQ(c.shape(), (ad::Shape{3}));
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{1, 2, 3}));
}

TEST(Forward, ShapeMismatchNamesOperationAndShapes) {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 3});
  try {
    ad::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ad::ShapeError& e) {
    EXPECT_EQ(e.op(), "matmul");
    EXPECT_EQ(e.lhs(), (ad::Shape{2, 3}));
    EXPECT_EQ(e.rhs(), (ad::Shape{2, 3}));
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ad::sub(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ad::ShapeError);
}

TEST(Forward, NonFiniteOutputReportsNode) {
  auto x = leaf({1000.0}, {1});
  try {
    ad::exp(x);
    FAIL() << "expected NonFiniteError";
  } catch (const ad::NonFiniteError& e) {
    EXPECT_EQ(e.op(), "exp");
    EXPECT_NE(std::string(e.what()).find("node"), std::string::npos);
  }
}

TEST(Forward, NoGraphWithoutGradInputs) {
  auto a = Tensor::matrix({{1, 2}});
  auto y = ad::tanh(a);
  EXPECT_FALSE(y.requires_grad());
  auto w = leaf({1, 2}, {1, 2});
  {
    ad::NoGradGuard guard;
    EXPECT_FALSE(ad::tanh(w).requires_grad());
  }
  EXPECT_TRUE(ad::tanh(w).requires_grad());
}

TEST(Backward, QuadraticGradient) {
  auto w = leaf({1, 2, 3}, {3});
  ad::backward(ad::sum(ad::mul(w, w)));
  EXPECT_EQ(std::vector<double>(w.grad().begin(), w.grad().end()), (std::vector<double>{2, 4, 6}));
}

TEST(Backward, TwoClassLogSoftmax) {
  auto z = leaf({0, 0}, {2});
  ad::backward(ad::slice(ad::log_softmax(z), 0, 0, 1));
  EXPECT_NEAR(z.grad()[0], 0.5, 1e-15);
  EXPECT_NEAR(z.grad()[1], -0.5, 1e-15);
}

TEST(Backward, RejectsNonScalarAndDetachedRoots) {
  auto w = leaf({1, 2}, {2});
  EXPECT_THROW(ad::backward(ad::tanh(w)), ad::AutodiffError);
  EXPECT_THROW(ad::backward(ad::sum(w).detach()), ad::AutodiffError);
  EXPECT_THROW(ad::backward(Tensor::scalar(1.0)), ad::AutodiffError);
}

TEST(Backward, ClearsGraphAfterwards) {
  auto w = leaf({1, 2}, {2});
  auto root = ad::sum(ad::tanh(w));
  ad::backward(root);
  EXPECT_EQ(root.impl()->producer, nullptr);
  EXPECT_THROW(ad::backward(root), ad::AutodiffError);
}

TEST(Backward, AccumulationIsLinear) {
  Rng rng(3);
  auto w = rng.normal_tensor(3, 2).set_requires_grad(true);
  auto f = [&] { return ad::sum(ad::tanh(ad::mul(w, w))); };
  auto g = [&] { return ad::mean(ad::exp(ad::scale(w, 0.3))); };

  w.zero_grad();
  ad::backward(f());
  std::vector<double> gf(w.grad().begin(), w.grad().end());
  w.zero_grad();
  ad::backward(g());
  std::vector<double> gg(w.grad().begin(), w.grad().end());
  w.zero_grad();
  ad::backward(ad::add(f(), g()));
  for (std::size_t i = 0; i < gf.size(); ++i) EXPECT_NEAR(w.grad()[i], gf[i] + gg[i], 1e-14);
}

TEST(Graph, TopologicalOrderAndSingleVisit) {
  Rng rng(1);
  auto a = rng.normal_tensor(2, 3).set_requires_grad(true);
  auto shared = ad::tanh(a);
  // `shared` feeds two branches; it must still appear exactly once.
  auto root = ad::sum(ad::add(ad::mul(shared, shared), ad::sigmoid(shared)));
  auto graph = ad::Graph::collect(root);
  std::unordered_set<const ad::TensorImpl*> seen;
  for (const auto& impl : graph.outputs) {
    ASSERT_NE(impl->producer, nullptr);
    for (const auto& in : impl->producer->inputs) {
      if (in->producer) EXPECT_TRUE(seen.count(in.get())) << "operand emitted after its consumer";
    }
    EXPECT_TRUE(seen.insert(impl.get()).second) << "node visited twice";
  }
  EXPECT_EQ(graph.outputs.back().get(), root.impl().get());
  EXPECT_EQ(graph.size(), 5u);  // tanh, mul, sigmoid, add, sum
}

TEST(Softmax, ExponentiatesToSimplex) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto z = rng.normal_tensor(4, 7);
    for (auto& v : z.data()) v *= 10.0;
    auto lp = ad::log_softmax(z);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        const double p = std::exp(lp.at(r, c));
        EXPECT_GT(p, 0.0);
        EXPECT_LE(p, 1.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = leaf({0.0}, {1});
  std::vector<Tensor> params{p};
  ad::AdamState state(params, {0.1, 0.5, 0.999, 1e-8});
  p.zero_grad();
  p.grad()[0] = 1.0;
  ad::adam_step(params, state);
  // t = 1: m_hat = g, v_hat = g^2, update = lr g / (|g| + eps).
  EXPECT_NEAR(p.at(0), -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1u);
  EXPECT_EQ(p.grad()[0], 0.0);
}

TEST(Adam, ZeroGradientIsIdentityButCountsStep) {
  Rng rng(2);
  auto p = rng.normal_tensor(3, 3).set_requires_grad(true);
  const std::vector<double> before(p.data().begin(), p.data().end());
  std::vector<Tensor> params{p};
  ad::AdamState state(params, {});
  for (int i = 0; i < 5; ++i) {
    p.zero_grad();
    ad::adam_step(params, state);
  }
  EXPECT_EQ(std::vector<double>(p.data().begin(), p.data().end()), before);
  EXPECT_EQ(state.step, 5u);
}

TEST(Adam, RepeatedGradientDoesNotGrowUpdate) {
  auto p = leaf({0.0}, {1});
  std::vector<Tensor> params{p};
  ad::AdamState state(params, {0.01, 0.5, 0.999, 1e-8});
  double prev = 0.0, first = 0.0;
  for (int i = 0; i < 2; ++i) {
    p.zero_grad();
    p.grad()[0] = 0.7;
    ad::adam_step(params, state);
    const double delta = std::abs(p.at(0) - prev);
    prev = p.at(0);
    if (i == 0) first = delta;
    else EXPECT_LE(delta, first * (1 + 1e-6));
  }
}

TEST(Adam, MissingGradientIsAnError) {
  auto p = leaf({1.0}, {1});
  std::vector<Tensor> params{p};
  ad::AdamState state(params, {});
  p.clear_grad();
  EXPECT_THROW(ad::adam_step(params, state), ad::AutodiffError);
}

TEST(Adam, MomentShapesMatchParameters) {
  auto a = Tensor::zeros({2, 3}, true), b = Tensor::zeros({4}, true);
  std::vector<Tensor> params{a, b};
  ad::AdamState state(params, {});
  ASSERT_EQ(state.first_moment.size(), 2u);
  EXPECT_EQ(state.first_moment[0].size(), 6u);
  EXPECT_EQ(state.second_moment[1].size(), 4u);
}

TEST(GradCheck, SumOfSquaresIsExact) {
  Rng rng(4);
  auto w = rng.normal_tensor(3, 4).set_requires_grad(true);
  std::vector<Tensor> params{w};
  EXPECT_LT(ad::finite_difference_check([&] { return ad::sum(ad::mul(w, w)); }, params), 1e-8);
}

TEST(GradCheck, ZeroStepIsRejected) {
  auto w = leaf({1.0}, {1});
  std::vector<Tensor> params{w};
  ad::GradCheckOptions o;
  o.step = 0.0;
  EXPECT_THROW(ad::finite_difference_check([&] { return ad::sum(w); }, params, o), ad::AutodiffError);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // The detach drops a term from the backward pass only.
  auto w = leaf({0.3, -0.2}, {2});
  std::vector<Tensor> params{w};
  EXPECT_GT(ad::finite_difference_check([&] { return ad::sum(ad::mul(w, w.detach())); }, params), 0.1);
}

TEST(GradCheck, ThreeLayerMlp) {
  Rng rng(5);
  MlpSpec spec{3, {6, 5, 4}, 1, Activation::Tanh};
  Mlp net(spec, rng);
  auto x = rng.normal_tensor(7, 3);
  EXPECT_LT(ad::finite_difference_check([&] { return ad::sum(net.forward(x)); }, net.parameters()), 1e-4);
}

/// Every differentiable op on randomized shapes; 100+ instances in total.
TEST(GradCheck, EveryOpOnRandomShapes) {
  Rng rng(11);
  int instances = 0;
  for (int trial = 0; trial < 9; ++trial) {
    const std::size_t n = 1 + rng.index(4), m = 1 + rng.index(5), k = 1 + rng.index(3);
    auto a = rng.normal_tensor(n, m).set_requires_grad(true);
    auto b = rng.normal_tensor(n, m).set_requires_grad(true);
    auto c = rng.normal_tensor(m, k).set_requires_grad(true);
    auto row = rng.normal_tensor(1, m).set_requires_grad(true);
    auto w_nm = rng.normal_tensor(n, m), w_nk = rng.normal_tensor(n, k), w_n1 = rng.normal_tensor(n, 1);
    auto pos = ad::Tensor(a.shape(), std::vector<double>(a.size()), true);
    for (std::size_t i = 0; i < pos.size(); ++i) pos.data()[i] = 0.5 + std::abs(a.data()[i]);
    const std::size_t cut = rng.index(m);
    std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
        {"matmul", [&] { return ad::sum(ad::mul(ad::matmul(a, c), w_nk)); }},
        {"add", [&] { return ad::sum(ad::mul(ad::add(a, b), w_nm)); }},
        {"add_row", [&] { return ad::sum(ad::mul(ad::add(a, row), w_nm)); }},
        {"sub", [&] { return ad::sum(ad::mul(ad::sub(a, b), w_nm)); }},
        {"mul", [&] { return ad::sum(ad::mul(ad::mul(a, b), w_nm)); }},
        {"scale", [&] { return ad::sum(ad::mul(ad::scale(a, 2.5), w_nm)); }},
        {"tanh", [&] { return ad::sum(ad::mul(ad::tanh(a), w_nm)); }},
        {"relu", [&] { return ad::sum(ad::mul(ad::relu(a), w_nm)); }},
        {"leaky_relu", [&] { return ad::sum(ad::mul(ad::leaky_relu(a, 0.2), w_nm)); }},
        {"sigmoid", [&] { return ad::sum(ad::mul(ad::sigmoid(a), w_nm)); }},
        {"exp", [&] { return ad::sum(ad::mul(ad::exp(a), w_nm)); }},
        {"log_softmax", [&] { return ad::sum(ad::mul(ad::log_softmax(a), w_nm)); }},
        {"clamp_min", [&] { return ad::sum(ad::mul(ad::clamp_min(a, 0.0), w_nm)); }},
        {"concat", [&] { return ad::sum(ad::mul(ad::slice(ad::concat({a, b}, 1), 1, 0, m), w_nm)); }},
        {"slice", [&] { return ad::sum(ad::slice(ad::mul(a, w_nm), 1, cut, m)); }},
        {"mean", [&] { return ad::mean(ad::mul(a, a)); }},
        {"l1_norm", [&] { return ad::sum(ad::mul(ad::l1_norm(a), w_n1)); }},
        {"l2_norm", [&] { return ad::sum(ad::mul(ad::l2_norm(pos), w_n1)); }},
    };
    std::vector<Tensor> params{a, b, c, row, pos};
    for (auto& [name, f] : cases) {
      ad::GradCheckOptions o;
      o.seed = static_cast<std::uint64_t>(trial);
      EXPECT_LT(ad::finite_difference_check(f, params, o), 1e-4) << name << " trial " << trial;
      ++instances;
    }
  }
  EXPECT_GE(instances, 100);
}

}  // namespace
}  // namespace jointgan
