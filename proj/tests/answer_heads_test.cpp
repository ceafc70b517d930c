#include <gtest/gtest.h>

#include <cmath>

#include "hmeqa/answer_heads.hpp"
#include "hmeqa/errors.hpp"
#include "test_util.hpp"

namespace hmeqa {
namespace {

using testing::random_tensor;
using testing::values_of;
using G = Graph<double>;

Var<double> in(G& g, std::vector<double> v) {
  const auto n = v.size();
  return g.input(Tensor<double>({n}, std::move(v)));
}

TEST(McScore, ZeroWeightGivesBias) {
  ParameterSet<double> params;
  Rng rng(1);
  ChoiceHead<double> head(params, "h", 6, rng);
  params.at("h.w").value.fill(0.0);
  params.at("h.b").value[0] = 0.75;
  G g;
  for (int k = 0; k < 3; ++k) EXPECT_EQ(head.score(g.input(random_tensor({6}, rng))).value()[0], 0.75);
}

TEST(McScore, LinearInWeightsAndMatchesDotProduct) {
  ParameterSet<double> params;
  Rng rng(2);
  ChoiceHead<double> head(params, "h", 6, rng);
  params.at("h.b").value[0] = 0.3;
  auto s = random_tensor({6}, rng);
  double dot = 0.0;
  for (std::size_t k = 0; k < 6; ++k) dot += params.at("h.w").value[k] * s[k];
  G g;
  const double base = head.score(g.input(s)).value()[0];
  EXPECT_NEAR(base, dot + 0.3, 1e-12);
  for (auto& w : params.at("h.w").value.data()) w *= 2.0;
  G g2;
  EXPECT_NEAR(head.score(g2.input(s)).value()[0] - 0.3, 2.0 * (base - 0.3), 1e-12);
}

TEST(McLoss, Examples) {
  G g;
  EXPECT_EQ(mc_loss(in(g, {5.0, 0.0, 0.0}), 0, 1.0).value()[0], 0.0);
  EXPECT_EQ(mc_loss(in(g, {1.0, 0.2, 0.5}), 0, 1.0).value()[0], 0.7);
  EXPECT_EQ(mc_loss(in(g, {2.0, 2.0, 2.0, 2.0, 2.0}), 3, 1.0).value()[0], 4.0);
}

TEST(McLoss, ZeroExactlyWhenSeparatedByTheMargin) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = values_of(random_tensor({4}, rng, -2, 2));
    const std::size_t p = rng.below(4);
    bool separated = true;
    for (std::size_t i = 0; i < 4; ++i)
      if (i != p && !(s[p] >= s[i] + 1.0)) separated = false;
    G g;
    const double loss = mc_loss(in(g, s), p, 1.0).value()[0];
    EXPECT_GE(loss, 0.0);
    EXPECT_EQ(loss == 0.0, separated);
  }
}

TEST(McLoss, KinkHasZeroSubgradient) {
  G g;
  auto s = g.input(Tensor<double>::vector({1.0, 0.0}), true);
  g.backward(mc_loss(s, 0, 1.0));
  EXPECT_EQ(g.grad(s), Tensor<double>::vector({0.0, 0.0}));
}

TEST(McLoss, RejectsBadArguments) {
  G g;
  EXPECT_THROW(mc_loss(in(g, {1.0, 2.0}), 2, 1.0), ContractError);
  EXPECT_THROW(mc_loss(in(g, {1.0}), 0, 1.0), ContractError);
  EXPECT_THROW(mc_loss(in(g, {1.0, 2.0}), 0, 0.0), ConfigError);
}

TEST(OpenHead, ZeroParametersGiveUniformProbabilities) {
  ParameterSet<double> params;
  Rng rng(4);
  OpenHead<double> head(params, "o", 5, 4, rng);
  for (auto& p : params) p.value.fill(0.0);
  G g;
  auto logits = head.logits(g.input(random_tensor({5}, rng)));
  for (double p : softmax(logits).value().data()) EXPECT_EQ(p, 0.25);
  EXPECT_NEAR(head.loss(logits, 2).value()[0], std::log(4.0), 1e-12);
}

TEST(OpenHead, ProbabilitiesMatchSoftmaxOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ParameterSet<double> params;
    Rng rng(seed);
    OpenHead<double> head(params, "o", 5, 7, rng);
    testing::randomize(params, rng, -3, 3);
    auto s = random_tensor({5}, rng);
    G g;
    auto p = head.probs(g.input(s));
    auto z = testing::affine_loop(params.at("o.W").value, values_of(s));
    double mx = -INFINITY, total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) mx = std::max(mx, z[c] += params.at("o.b").value[c]);
    for (double& x : z) total += x = std::exp(x - mx);
    for (std::size_t c = 0; c < 7; ++c) EXPECT_NEAR(p.value()[c], z[c] / total, 1e-12);
    EXPECT_NEAR(testing::sum_of(p.value().data()), 1.0, 1e-10);
  }
}

TEST(OpenLoss, HandComputedLogSoftmax) {
  ParameterSet<double> params;
  Rng rng(5);
  OpenHead<double> head(params, "o", 2, 3, rng);
  G g;
  EXPECT_NEAR(head.loss(in(g, {1.0, 2.0, 3.0}), 2).value()[0], 0.40761, 1e-4);
  EXPECT_NEAR(head.loss(in(g, {0.0, 0.0, 60.0}), 2).value()[0], 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(head.loss(in(g, {1e6, -1e6, 0.0}), 1).value()[0]));
  EXPECT_THROW(head.loss(in(g, {1.0, 2.0, 3.0}), 3), ContractError);
}

TEST(Predict, ArgmaxWithLowestIndexTieBreak) {
  EXPECT_EQ(predict(std::vector<double>{0.1, 0.7, 0.2}), 1u);
  EXPECT_EQ(predict(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_THROW(predict(std::vector<double>{}), ContractError);
}

TEST(Predict, InvariantUnderIncreasingTransforms) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = values_of(random_tensor({6}, rng, -5, 5));
    const auto k = predict(s);
    auto shifted = s, squashed = s;
    for (auto& x : shifted) x += 17.0;
    for (auto& x : squashed) x = std::tanh(x / 10) * 3 + 1;
    EXPECT_EQ(predict(shifted), k);
    EXPECT_EQ(predict(squashed), k);
  }
}

}  // namespace
}  // namespace hmeqa
