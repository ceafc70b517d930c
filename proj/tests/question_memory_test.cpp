#include <gtest/gtest.h>

#include "hmeqa/errors.hpp"
#include "hmeqa/grad_check.hpp"
#include "hmeqa/question_memory.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace hmeqa {
namespace {

using oracle::Mat;
using oracle::Vec;
using testing::probe_loss;
using testing::random_tensor;
using testing::values_of;
using G = Graph<double>;
using QM = QuestionMemory<double>;

constexpr std::size_t kIn = 3, kD = 4, kS = 3;

struct Fixture {
  explicit Fixture(std::uint64_t seed, std::size_t slots = kS, QM::Options options = {})
      : rng(seed), qm(params, "qm", kIn, kD, slots, rng, options) {
    testing::randomize(params, rng);
  }
  ParameterSet<double> params;
  Rng rng;
  QM qm;
};

Tensor<double> to_tensor(const Mat& m) {
  Tensor<double> t({m.size(), m.front().size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t k = 0; k < m[i].size(); ++k) t.at(i, k) = m[i][k];
  return t;
}

Var<double> in(G& g, const Vec& v) { return g.input(Tensor<double>({v.size()}, v)); }

EncodedSequence<double> encoded(G& g, const Tensor<double>& rows, std::size_t valid) {
  return {g.input(FeatureSequence<double>::make(rows, valid).frames), valid};
}

TEST(QmContent, ZeroParametersAndBiasOnly) {
  Fixture f(1);
  G g;
  auto c = f.qm.content(g.zeros({kIn}), g.zeros({kD}));
  const auto& b = f.params.at("qm.b_c").value;
  for (std::size_t k = 0; k < kD; ++k) EXPECT_NEAR(c.value()[k], testing::sigmoid(b[k]), 1e-15);
  for (auto& p : f.params) p.value.fill(0.0);
  G fresh;
  auto half = f.qm.content(fresh.input(random_tensor({kIn}, f.rng)), fresh.input(random_tensor({kD}, f.rng)));
  for (double v : half.value().data()) EXPECT_EQ(v, 0.5);
}

TEST(QmWrite, ZeroWeightLeavesSlotUnchanged) {
  Fixture f(2);
  G g;
  auto m = random_tensor({kS, kD}, f.rng);
  auto out = f.qm.blend(g.input(m), in(g, {0.0, 0.25, 0.75}), g.input(random_tensor({kD}, f.rng)));
  for (std::size_t k = 0; k < kD; ++k) EXPECT_EQ(out.value().at(0, k), m.at(0, k));
}

TEST(QmWrite, SingleSlotTakesTheContent) {
  Fixture f(3, 1);
  G g;
  auto c = random_tensor({kD}, f.rng);
  auto w = f.qm.write(g.input(random_tensor({1, kD}, f.rng)), g.input(c), g.input(random_tensor({kD}, f.rng)));
  EXPECT_EQ(w.weights.value()[0], 1.0);
  for (std::size_t k = 0; k < kD; ++k) EXPECT_EQ(w.memory.value().at(0, k), c[k]);
}

TEST(QmRead, IdenticalSlotsAndOneHot) {
  Fixture f(4);
  auto m_star = values_of(random_tensor({kD}, f.rng));
  G g;
  auto r = f.qm.read(g.input(to_tensor(Mat(kS, m_star))), g.input(random_tensor({kD}, f.rng)),
                     g.input(random_tensor({kD}, f.rng)));
  EXPECT_LT(oracle::max_diff(values_of(r.content.value()), m_star), 1e-15);

  for (auto name : {"qm.W_cb", "qm.W_hb", "qm.b_b"}) f.params.at(name).value.fill(0.0);
  auto& u = f.params.at("qm.U_b").value;
  u.fill(0.0);
  for (std::size_t k = 0; k < kD; ++k) u.at(k, k) = 100.0;
  f.params.at("qm.v_b").value.fill(1000.0);
  Mat m(kS, Vec(kD, -1.0));
  m[1] = Vec(kD, 1.0);
  G fresh;
  auto one_hot = f.qm.read(fresh.input(to_tensor(m)), fresh.zeros({kD}), fresh.zeros({kD}));
  EXPECT_EQ(values_of(one_hot.weights.value()), (Vec{0.0, 1.0, 0.0}));
  EXPECT_EQ(values_of(one_hot.content.value()), m[1]);
}

TEST(QmHiddenUpdate, ZeroParametersGiveHalf) {
  Fixture f(5);
  for (auto& p : f.params) p.value.fill(0.0);
  G g;
  auto h = f.qm.hidden_update(g.input(random_tensor({kIn}, f.rng)), g.input(random_tensor({kD}, f.rng)),
                              g.input(random_tensor({kD}, f.rng)));
  for (double v : h.value().data()) EXPECT_EQ(v, 0.5);
}

TEST(QmStep, MatchesOracleOnFiftyCases) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const bool strict = seed % 5 == 0;
    Fixture f(seed, kS, {strict});
    auto m = oracle::rows_of(random_tensor({kS, kD}, f.rng));
    auto h = values_of(random_tensor({kD}, f.rng, 0, 1)), o = values_of(random_tensor({kIn}, f.rng));
    G g;
    auto got = f.qm.step({g.input(to_tensor(m)), in(g, h)}, in(g, o));
    auto want = oracle::qm_step(f.params, "qm", m, h, o, strict);
    EXPECT_LT(oracle::max_diff(values_of(got.alpha.value()), want.alpha), 1e-12);
    EXPECT_LT(oracle::max_diff(values_of(got.beta.value()), want.beta), 1e-12);
    EXPECT_LT(oracle::max_diff(oracle::rows_of(got.state.memory.value()), want.memory), 1e-12);
    EXPECT_LT(oracle::max_diff(values_of(got.state.hidden.value()), want.hidden), 1e-12);
    for (double x : got.state.hidden.value().data()) EXPECT_TRUE(x > 0.0 && x < 1.0);
  }
}

TEST(QmProcess, SingleWordAndEmptyInput) {
  Fixture f(6);
  G g;
  auto out = f.qm.process(encoded(g, random_tensor({4, kIn}, f.rng), 1));
  EXPECT_EQ(out.trace.size(), 1u);
  EXPECT_EQ(out.question_features.value().rows(), 4u);
  EncodedSequence<double> empty{g.zeros({4, kIn}), 0};
  EXPECT_THROW(f.qm.process(empty), ContractError);
}

TEST(QmProcess, PrefixCausality) {
  Fixture f(7);
  auto x = random_tensor({5, kIn}, f.rng);
  G g;
  auto full = f.qm.process(encoded(g, x, 5));
  for (std::size_t t = 1; t < 5; ++t) {
    auto part = f.qm.process(encoded(g, x, t));
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t k = 0; k < kD; ++k)
        EXPECT_EQ(part.question_features.value().at(r, k), full.question_features.value().at(r, k));
  }
}

TEST(QmProcess, DistributionsAndSlotsStayBounded) {
  Fixture f(8);
  G g;
  auto out = f.qm.process(encoded(g, random_tensor({6, kIn}, f.rng), 6));
  for (const auto& t : out.trace) {
    EXPECT_NEAR(testing::sum_of(t.alpha), 1.0, 1e-10);
    EXPECT_NEAR(testing::sum_of(t.beta), 1.0, 1e-10);
  }
  for (double x : out.final_state.memory.value().data()) EXPECT_TRUE(x >= 0.0 && x <= 1.0);
}

TEST(QmProcess, GradientCheckFourSteps) {
  Fixture f(9);
  for (auto& p : f.params)
    for (auto& x : p.value.data()) x *= 0.5;
  auto x = random_tensor({4, kIn}, f.rng);
  auto report = grad_check([&](G& g) { return probe_loss(g, f.qm.process(encoded(g, x, 4)).question_features); },
                           f.params);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst_parameter << "[" << report.worst_index << "]";
}

}  // namespace
}  // namespace hmeqa
