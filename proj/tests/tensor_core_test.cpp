#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "hmeqa/errors.hpp"
#include "hmeqa/grad_check.hpp"
#include "hmeqa/graph.hpp"
#include "test_util.hpp"

namespace hmeqa {
namespace {

using testing::random_tensor;
using G = Graph<double>;
using V = Var<double>;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor<double>({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  EXPECT_THROW(Tensor<double>({0}), DimensionError);
  Tensor<double> t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(Tensor, NonFiniteIsDetected) {
  auto t = Tensor<double>::vector({1.0, NAN});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.check_finite("test"), NumericError);
}

TEST(MatMul, Examples) {
  G g;
  auto identity = g.input(Tensor<double>::matrix(2, 2, {1, 0, 0, 1}));
  auto b = g.input(Tensor<double>::matrix(2, 2, {3, 4, 5, 6}));
  EXPECT_EQ(matmul(identity, b).value(), b.value());

  auto zero = g.input(Tensor<double>({2, 2}));
  EXPECT_EQ(matmul(zero, b).value(), Tensor<double>({2, 2}));

  auto a = g.input(Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  auto col = g.input(Tensor<double>::matrix(2, 1, {5, 6}));
  EXPECT_EQ(matmul(a, col).value(), Tensor<double>::matrix(2, 1, {17, 39}));
  auto vec = g.input(Tensor<double>::vector({5, 6}));
  EXPECT_EQ(matmul(a, vec).value(), Tensor<double>::vector({17, 39}));
}

TEST(MatMul, ShapeMismatchNamesBothShapes) {
  G g;
  auto a = g.input(Tensor<double>({2, 3}));
  auto b = g.input(Tensor<double>({2, 2}));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[2x2]"), std::string::npos);
  }
}

TEST(MaskedSoftmax, Examples) {
  G g;
  auto flat = masked_softmax(g.input(Tensor<double>::vector({0.7, 0.7, 0.7})), {true, true, true});
  for (double p : flat.value().data()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);

  auto single = masked_softmax(g.input(Tensor<double>::vector({5, 100, -3})), {true, false, false});
  EXPECT_EQ(single.value(), Tensor<double>::vector({1, 0, 0}));

  // exp(1), exp(2), exp(3) normalized.
  auto p = softmax(g.input(Tensor<double>::vector({1, 2, 3})));
  EXPECT_NEAR(p.value()[0], 0.09003, 1e-5);
  EXPECT_NEAR(p.value()[1], 0.24473, 1e-5);
  EXPECT_NEAR(p.value()[2], 0.66524, 1e-5);
}

TEST(MaskedSoftmax, EmptySupportIsAnError) {
  G g;
  auto v = g.input(Tensor<double>::vector({1, 2}));
  EXPECT_THROW(masked_softmax(v, {false, false}), ContractError);
}

TEST(MaskedSoftmax, LargeLogitsStayFinite) {
  G g;
  auto p = softmax(g.input(Tensor<double>::vector({1000, 999, -1000})));
  EXPECT_TRUE(p.value().all_finite());
  EXPECT_NEAR(p.value()[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(MaskedSoftmax, Properties) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    std::vector<bool> mask(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any |= (mask[i] = rng.uniform() < 0.6);
    if (!any) mask[rng.below(n)] = true;
    auto logits = random_tensor({n}, rng, -20, 20);
    const double shift = rng.uniform(-50, 50);
    auto shifted = logits;
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) shifted[i] += shift;

    G g;
    auto p = masked_softmax(g.input(logits), mask).value();
    auto q = masked_softmax(g.input(shifted), mask).value();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(p[i], 0.0);
      if (!mask[i]) EXPECT_EQ(p[i], 0.0);
      EXPECT_NEAR(p[i], q[i], 1e-12);
      total += p[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Backward, SumGivesOnes) {
  G g;
  auto x = g.input(Tensor<double>::vector({0.3, -2, 7}), true);
  g.backward(sum(x));
  EXPECT_EQ(g.grad(x), Tensor<double>::vector({1, 1, 1}));
}

TEST(Backward, SigmoidAtZero) {
  G g;
  auto x = g.input(Tensor<double>::vector({0.0}), true);
  g.backward(sigmoid(x));
  EXPECT_DOUBLE_EQ(g.grad(x)[0], 0.25);
}

TEST(Backward, RejectsNonScalarLoss) {
  G g;
  auto x = g.input(Tensor<double>::vector({1, 2}), true);
  EXPECT_THROW(g.backward(tanh(x)), ContractError);
}

TEST(Forward, NonFiniteValueFailsAtProducer) {
  G g;
  auto x = g.input(Tensor<double>::vector({1e200}));
  try {
    mul(x, x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos);
  }
}

TEST(Backward, GradientOverflowIsReported) {
  G g;
  auto x = g.input(Tensor<double>::vector({1e-200}), true);
  // 1e200 * 1e-200 is finite, but d/dx = 1e200 * 1e200 overflows.
  auto y = affine(x, 1e200, 0.0);
  auto loss = sum(affine(mul(y, y), 1e200, 0.0));
  EXPECT_THROW(g.backward(loss), NumericError);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  // f(x) = s·s + s with s = tanh(w·x): the shared node must receive both
  // contributions, matching the expanded tree with s computed twice.
  Rng rng(3);
  auto w0 = random_tensor({3, 3}, rng);
  auto x0 = random_tensor({3}, rng);

  G shared;
  auto w = shared.input(w0, true);
  auto x = shared.input(x0, true);
  auto s = tanh(matmul(w, x));
  shared.backward(sum(add(mul(s, s), s)));

  G tree;
  auto w2 = tree.input(w0, true);
  auto x2 = tree.input(x0, true);
  auto s1 = tanh(matmul(w2, x2));
  auto s2 = tanh(matmul(w2, x2));
  auto s3 = tanh(matmul(w2, x2));
  tree.backward(sum(add(mul(s1, s2), s3)));

  EXPECT_LT(testing::max_abs_diff(shared.grad(w), tree.grad(w2)), 1e-14);
  EXPECT_LT(testing::max_abs_diff(shared.grad(x), tree.grad(x2)), 1e-14);
}

TEST(Backward, SweepRestartsFromZero) {
  G g;
  auto x = g.input(Tensor<double>::vector({2.0}), true);
  auto loss = sum(mul(x, x));
  g.backward(loss);
  g.backward(loss);
  EXPECT_DOUBLE_EQ(g.grad(x)[0], 4.0);
}

TEST(Backward, ParameterGradsAccumulateUntilZeroed) {
  ParameterSet<double> params;
  auto& p = params.add("p", {1});
  p.value[0] = 3.0;
  for (int i = 0; i < 2; ++i) {
    G g;
    auto v = g.parameter(p);
    g.backward(sum(mul(v, v)));
  }
  EXPECT_DOUBLE_EQ(p.grad[0], 12.0);
  params.zero_grad();
  EXPECT_DOUBLE_EQ(p.grad[0], 0.0);
}

TEST(GradCheck, QuadraticIsExact) {
  ParameterSet<double> params;
  params.add("theta", {1}).value[0] = 3.0;
  auto report = grad_check(
      [&](G& g) {
        auto t = g.parameter(params.at("theta"));
        return sum(mul(t, t));
      },
      params);
  EXPECT_NEAR(report.analytic, 6.0, 1e-12);
  EXPECT_NEAR(report.numeric, 6.0, 1e-8);
  EXPECT_LT(report.max_relative_error, 1e-9);
}

TEST(GradCheck, ConstantHasZeroError) {
  ParameterSet<double> params;
  params.add("theta", {2});
  auto report = grad_check([&](G& g) { return g.input(Tensor<double>::vector({4.2})); }, params);
  EXPECT_EQ(report.analytic, 0.0);
  EXPECT_EQ(report.numeric, 0.0);
  EXPECT_EQ(report.max_relative_error, 0.0);
}

TEST(GradCheck, NonFiniteLossIsAnError) {
  ParameterSet<double> params;
  params.add("theta", {1}).value[0] = 1.0;
  EXPECT_THROW(grad_check(
                   [&](G& g) {
                     auto t = g.parameter(params.at("theta"));
                     return sum(affine(mul(t, t), 1e308, 1e308));
                   },
                   params),
               NumericError);
  EXPECT_THROW(grad_check([&](G& g) { return g.input(Tensor<double>::vector({1.0})); }, params, 0.0),
               ContractError);
}

// Every primitive against central differences on random inputs in [-1, 1].
// The loss contracts the output with fixed random weights so that every
// output element contributes a distinct gradient.
struct PrimitiveCase {
  const char* name;
  std::vector<Shape> inputs;
  std::function<V(G&, const std::vector<V>&)> apply;
};

class PrimitiveGradient : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const auto& c = GetParam();
  Rng rng(1234);
  ParameterSet<double> params;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    auto& p = params.add("x" + std::to_string(i), c.inputs[i]);
    p.value = random_tensor(c.inputs[i], rng);
  }
  Tensor<double> weights;
  auto build = [&](G& g) {
    std::vector<V> xs;
    for (auto& p : params) xs.push_back(g.parameter(p));
    auto out = c.apply(g, xs);
    if (weights.empty()) weights = random_tensor(out.shape(), rng);
    return sum(mul(out, g.input(weights)));
  };
  auto report = grad_check(build, params);
  EXPECT_LT(report.max_relative_error, 1e-4)
      << c.name << " worst " << report.worst_parameter << "[" << report.worst_index
      << "] analytic=" << report.analytic << " numeric=" << report.numeric;
}

const std::vector<bool> kMask = {true, false, true, true};

INSTANTIATE_TEST_SUITE_P(
    AllPrimitives, PrimitiveGradient,
    ::testing::Values(
        PrimitiveCase{"matmul", {{3, 4}, {4, 2}}, [](G&, auto& x) { return matmul(x[0], x[1]); }},
        PrimitiveCase{"matvec", {{3, 4}, {4}}, [](G&, auto& x) { return matmul(x[0], x[1]); }},
        PrimitiveCase{"matmul_bt", {{3, 4}, {5, 4}}, [](G&, auto& x) { return matmul_bt(x[0], x[1]); }},
        PrimitiveCase{"add", {{3, 2}, {3, 2}}, [](G&, auto& x) { return add(x[0], x[1]); }},
        PrimitiveCase{"sub", {{4}, {4}}, [](G&, auto& x) { return sub(x[0], x[1]); }},
        PrimitiveCase{"hadamard", {{2, 3}, {2, 3}}, [](G&, auto& x) { return mul(x[0], x[1]); }},
        PrimitiveCase{"add_rowwise", {{3, 4}, {4}}, [](G&, auto& x) { return add_rowwise(x[0], x[1]); }},
        PrimitiveCase{"affine", {{5}}, [](G&, auto& x) { return affine(x[0], -1.5, 0.25); }},
        PrimitiveCase{"scale", {{2, 3}, {1}}, [](G&, auto& x) { return scale(x[0], x[1]); }},
        PrimitiveCase{"element", {{4}}, [](G&, auto& x) { return element(x[0], 2); }},
        PrimitiveCase{"slice", {{6}}, [](G&, auto& x) { return slice(x[0], 1, 3); }},
        PrimitiveCase{"sigmoid", {{5}}, [](G&, auto& x) { return sigmoid(x[0]); }},
        PrimitiveCase{"tanh", {{5}}, [](G&, auto& x) { return tanh(x[0]); }},
        PrimitiveCase{"relu", {{6}}, [](G&, auto& x) { return relu(x[0]); }},
        PrimitiveCase{"concat_vectors", {{2}, {3}, {1}},
                      [](G&, auto& x) { return concat({x[0], x[1], x[2]}); }},
        PrimitiveCase{"concat_matrices", {{2, 2}, {2, 3}}, [](G&, auto& x) { return concat({x[0], x[1]}); }},
        PrimitiveCase{"weighted_rows", {{4, 3}, {4}}, [](G&, auto& x) { return weighted_rows(x[0], x[1]); }},
        PrimitiveCase{"outer", {{3}, {4}}, [](G&, auto& x) { return outer(x[0], x[1]); }},
        PrimitiveCase{"scale_rows", {{3, 4}, {3}}, [](G&, auto& x) { return scale_rows(x[0], x[1]); }},
        PrimitiveCase{"sum", {{3, 2}}, [](G&, auto& x) { return sum(x[0]); }},
        PrimitiveCase{"mean", {{7}}, [](G&, auto& x) { return mean(x[0]); }},
        PrimitiveCase{"softmax", {{5}}, [](G&, auto& x) { return softmax(x[0]); }},
        PrimitiveCase{"masked_softmax", {{4}}, [](G&, auto& x) { return masked_softmax(x[0], kMask); }},
        PrimitiveCase{"softmax_cross_entropy", {{5}},
                      [](G&, auto& x) { return softmax_cross_entropy(x[0], 3); }},
        PrimitiveCase{"gather_rows", {{5, 3}},
                      [](G&, auto& x) { return gather_rows(x[0], {4, 0, 4, 2}); }},
        PrimitiveCase{"row", {{4, 3}}, [](G&, auto& x) { return row(x[0], 2); }},
        PrimitiveCase{"stack_rows", {{3}, {3}},
                      [](G&, auto& x) { return stack_rows(std::vector<V>{x[0], x[1]}, 4); }}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  Rng rng(5);
  auto w = random_tensor({8, 8}, rng);
  auto x = random_tensor({8}, rng);
  auto run = [&] {
    G g;
    return softmax(tanh(matmul(g.input(w), g.input(x)))).value();
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace hmeqa
