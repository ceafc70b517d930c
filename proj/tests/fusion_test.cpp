#include <gtest/gtest.h>

#include "hmeqa/errors.hpp"
#include "hmeqa/fusion.hpp"
#include "hmeqa/grad_check.hpp"
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

constexpr std::size_t kV = 4, kQ = 3, kDs = 5;

struct Fixture {
  explicit Fixture(std::uint64_t seed) : rng(seed), reasoner(params, "f", kV, kQ, kDs, rng) {
    testing::randomize(params, rng);
  }
  ParameterSet<double> params;
  Rng rng;
  FusionReasoner<double> reasoner;

  AttendedSequence<double> sequence(G& g, std::size_t rows, std::size_t width, std::size_t valid) {
    auto t = random_tensor({rows, width}, rng);
    for (std::size_t r = valid; r < rows; ++r)
      for (std::size_t k = 0; k < width; ++k) t.at(r, k) = 0.0;
    return {g.input(t), valid};
  }
};

Var<double> in(G& g, const Vec& v) { return g.input(Tensor<double>({v.size()}, v)); }

TEST(TemporalAttend, IdenticalRowsGiveUniformWeights) {
  Fixture f(1);
  auto h = random_tensor({kV}, f.rng);
  Tensor<double> seq({6, kV});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < kV; ++k) seq.at(r, k) = h[k];
  G g;
  auto a = f.reasoner.attend_video(g.input(random_tensor({kDs}, f.rng)), {g.input(seq), 4});
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(a.weights.value()[i], i < 4 ? 0.25 : 0.0, 1e-15);
  for (std::size_t k = 0; k < kV; ++k) EXPECT_NEAR(a.context.value()[k], h[k], 1e-15);
}

TEST(TemporalAttend, SingleValidPosition) {
  Fixture f(2);
  G g;
  auto seq = f.sequence(g, 5, kQ, 1);
  auto a = f.reasoner.attend_question(g.input(random_tensor({kDs}, f.rng)), seq);
  EXPECT_EQ(values_of(a.weights.value()), (Vec{1.0, 0.0, 0.0, 0.0, 0.0}));
  for (std::size_t k = 0; k < kQ; ++k) EXPECT_EQ(a.context.value()[k], seq.features.value().at(0, k));
}

TEST(TemporalAttend, MatchesOracleAndRejectsEmptyRange) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Fixture f(seed);
    G g;
    auto seq = f.sequence(g, 6, kV, 1 + seed % 6);
    auto s = values_of(random_tensor({kDs}, f.rng));
    auto a = f.reasoner.attend_video(in(g, s), seq);
    auto want = oracle::temporal_attend(f.params, "f.video", s, oracle::rows_of(seq.features.value()), seq.valid_len);
    EXPECT_LT(oracle::max_diff(values_of(a.weights.value()), want.gamma), 1e-12);
    EXPECT_LT(oracle::max_diff(values_of(a.context.value()), want.context), 1e-12);
  }
  Fixture f(1);
  G g;
  EXPECT_THROW(f.reasoner.attend_video(g.zeros({kDs}), {g.zeros({3, kV}), 0}), ContractError);
}

TEST(TransformContent, ReluClampsAndMatchesOracle) {
  Fixture f(3);
  f.params.at("f.video.W_d").value.fill(0.0);
  f.params.at("f.video.b_d").value.fill(-1.0);
  {
    G g;
    for (double v : f.reasoner.transform_video(g.input(random_tensor({kV}, f.rng))).value().data()) EXPECT_EQ(v, 0.0);
  }
  Fixture h(4);
  h.params.at("f.question.b_d").value.fill(0.0);
  {
    G g;
    for (double v : h.reasoner.transform_question(g.zeros({kQ})).value().data()) EXPECT_EQ(v, 0.0);
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Fixture r(seed);
    auto c = values_of(random_tensor({kQ}, r.rng));
    G g;
    auto d = r.reasoner.transform_question(in(g, c));
    EXPECT_LT(oracle::max_diff(values_of(d.value()), oracle::transform(r.params, "f.question", c)), 1e-12);
  }
}

TEST(ModalityFuse, SymmetricAndConvexCases) {
  Fixture f(5);
  for (auto name : {"f.video.W_p", "f.video.V_p", "f.question.W_p", "f.question.V_p"}) f.params.at(name).value.fill(0.0);
  f.params.at("f.question.b_p").value = f.params.at("f.video.b_p").value;
  auto dv = values_of(random_tensor({kDs}, f.rng)), dq = values_of(random_tensor({kDs}, f.rng));
  G g;
  auto fused = f.reasoner.fuse(g.input(random_tensor({kDs}, f.rng)), in(g, dv), in(g, dq));
  EXPECT_EQ(values_of(fused.weights.value()), (Vec{0.5, 0.5}));
  for (std::size_t k = 0; k < kDs; ++k) EXPECT_NEAR(fused.fused.value()[k], (dv[k] + dq[k]) / 2, 1e-15);

  Fixture r(6);
  G g2;
  auto same = r.reasoner.fuse(g2.input(random_tensor({kDs}, r.rng)), in(g2, dv), in(g2, dv));
  EXPECT_LT(oracle::max_diff(values_of(same.fused.value()), dv), 1e-15);
}

// Zero weights and b_p = atanh(0.5) give tanh features of 0.5, so the logits
// are 0.5·Σv_p = 2 for the video bank and 0 for the question bank.
TEST(ModalityFuse, TwoWaySoftmaxOfTwoAndZero) {
  Fixture f(7);
  for (auto name : {"f.video.W_p", "f.video.V_p", "f.question.W_p", "f.question.V_p", "f.question.b_p"})
    f.params.at(name).value.fill(0.0);
  f.params.at("f.video.b_p").value.fill(std::atanh(0.5));
  f.params.at("f.v_p").value.fill(4.0 / kDs);
  G g;
  auto fused = f.reasoner.fuse(g.input(random_tensor({kDs}, f.rng)), g.input(random_tensor({kDs}, f.rng)),
                               g.input(random_tensor({kDs}, f.rng)));
  EXPECT_NEAR(fused.weights.value()[0], 0.8808, 1e-4);
  EXPECT_NEAR(fused.weights.value()[1], 0.1192, 1e-4);
}

TEST(ModalityFuse, MatchesOracleAndStaysInHull) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Fixture f(seed);
    auto s = values_of(random_tensor({kDs}, f.rng)), dv = values_of(random_tensor({kDs}, f.rng)),
         dq = values_of(random_tensor({kDs}, f.rng));
    G g;
    auto got = f.reasoner.fuse(in(g, s), in(g, dv), in(g, dq));
    auto want = oracle::fuse(f.params, "f", s, dv, dq);
    EXPECT_LT(oracle::max_diff(values_of(got.weights.value()), want.phi), 1e-12);
    EXPECT_LT(oracle::max_diff(values_of(got.fused.value()), want.fused), 1e-12);
    for (std::size_t k = 0; k < kDs; ++k) {
      EXPECT_GE(got.fused.value()[k], std::min(dv[k], dq[k]) - 1e-15);
      EXPECT_LE(got.fused.value()[k], std::max(dv[k], dq[k]) + 1e-15);
    }
  }
}

TEST(Reason, MatchesOracleLoop) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Fixture f(seed);
    G g;
    auto video = f.sequence(g, 5, kV, 4), question = f.sequence(g, 3, kQ, 3);
    auto out = f.reasoner.reason(video, question, 3);
    Vec s(kDs, 0.0), c(kDs, 0.0);
    auto hv = oracle::rows_of(video.features.value()), hq = oracle::rows_of(question.features.value());
    for (std::size_t l = 0; l < 3; ++l) {
      auto av = oracle::temporal_attend(f.params, "f.video", s, hv, 4);
      auto aq = oracle::temporal_attend(f.params, "f.question", s, hq, 3);
      auto fu = oracle::fuse(f.params, "f", s, oracle::transform(f.params, "f.video", av.context),
                             oracle::transform(f.params, "f.question", aq.context));
      EXPECT_LT(oracle::max_diff(out.trace[l].gamma_video, av.gamma), 1e-12);
      EXPECT_LT(oracle::max_diff(out.trace[l].gamma_question, aq.gamma), 1e-12);
      EXPECT_LT(oracle::max_diff(out.trace[l].phi, fu.phi), 1e-12);
      std::tie(s, c) = oracle::lstm(f.params, "f.controller", fu.fused, s, c);
    }
    EXPECT_LT(oracle::max_diff(values_of(out.final_state.value()), s), 1e-12);
  }
}

TEST(Reason, StepCountAndErrors) {
  Fixture f(8);
  G g;
  auto video = f.sequence(g, 5, kV, 5), question = f.sequence(g, 3, kQ, 2);
  EXPECT_EQ(f.reasoner.reason(video, question, 1).trace.size(), 1u);
  EXPECT_THROW(f.reasoner.reason(video, question, 0), ConfigError);
  auto state = f.reasoner.continue_reasoning(f.reasoner.initial_state(g), video, question, 4, nullptr);
  EXPECT_EQ(state.step, 4u);
}

TEST(Reason, AttentionRefinesAcrossSteps) {
  int changed = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Fixture f(seed);
    G g;
    auto out = f.reasoner.reason(f.sequence(g, 5, kV, 5), f.sequence(g, 3, kQ, 3), 2);
    if (oracle::max_diff(out.trace[0].gamma_video, out.trace[1].gamma_video) > 1e-9) ++changed;
  }
  EXPECT_GE(changed, 18);
}

TEST(Reason, MasksPaddedPositions) {
  Fixture f(9);
  G g;
  auto out = f.reasoner.reason(f.sequence(g, 6, kV, 2), f.sequence(g, 4, kQ, 3), 3);
  for (const auto& t : out.trace) {
    for (std::size_t i = 2; i < 6; ++i) EXPECT_EQ(t.gamma_video[i], 0.0);
    EXPECT_EQ(t.gamma_question[3], 0.0);
    EXPECT_NEAR(testing::sum_of(t.gamma_video), 1.0, 1e-10);
    EXPECT_NEAR(testing::sum_of(t.gamma_question), 1.0, 1e-10);
    EXPECT_NEAR(t.phi[0] + t.phi[1], 1.0, 1e-12);
  }
}

TEST(Reason, ContinuingOneStepEqualsOneMoreIteration) {
  Fixture f(10);
  G g;
  auto video = f.sequence(g, 5, kV, 4), question = f.sequence(g, 3, kQ, 3);
  for (std::size_t l = 1; l <= 4; ++l) {
    auto longer = f.reasoner.reason(video, question, l + 1);
    auto state = f.reasoner.continue_reasoning(f.reasoner.initial_state(g), video, question, l, nullptr);
    auto next = f.reasoner.reason_step(state, video, question);
    EXPECT_EQ(next.state.controller.h.value(), longer.final_state.value());
    EXPECT_EQ(next.state.step, l + 1);
  }
}

TEST(Reason, GradientCheckThreeSteps) {
  Fixture f(11);
  G setup;
  auto v = random_tensor({4, kV}, f.rng), q = random_tensor({3, kQ}, f.rng);
  auto report = grad_check(
      [&](G& g) { return probe_loss(g, f.reasoner.reason({g.input(v), 4}, {g.input(q), 3}, 3).final_state); },
      f.params);
  EXPECT_EQ(report.checked, f.params.scalar_count());
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst_parameter << "[" << report.worst_index << "]";
}

TEST(AnswerRepresentation, DimensionAndIdenticalRows) {
  ParameterSet<double> params;
  Rng rng(12);
  AnswerRepresentation<double> rep(params, "ans", {{"motion", 3}, {"appearance", 3}}, kDs, rng);
  EXPECT_EQ(rep.output_dim(), kDs + 6);
  auto row = random_tensor({3}, rng);
  Tensor<double> same({4, 3});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 3; ++k) same.at(r, k) = row[k];
  G g;
  auto s = g.input(random_tensor({kDs}, rng));
  auto out = rep.build(s, {{g.input(same), 4}, {g.input(random_tensor({4, 3}, rng)), 2}});
  ASSERT_EQ(out.representation.size(), kDs + 6);
  for (std::size_t k = 0; k < kDs; ++k) EXPECT_EQ(out.representation.value()[k], s.value()[k]);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(out.representation.value()[kDs + k], row[k], 1e-15);
  EXPECT_THROW(rep.build(s, {{g.input(same), 4}}), ContractError);
}

TEST(AnswerRepresentation, MatchesOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ParameterSet<double> params;
    Rng rng(seed);
    AnswerRepresentation<double> rep(params, "ans", {{"motion", 3}, {"appearance", 2}}, kDs, rng);
    auto s = values_of(random_tensor({kDs}, rng));
    auto om = random_tensor({4, 3}, rng), oa = random_tensor({4, 2}, rng);
    G g;
    auto out = rep.build(in(g, s), {{g.input(om), 4}, {g.input(oa), 4}});
    Vec want = s;
    for (auto [name, o] : {std::pair{"ans.motion", &om}, {"ans.appearance", &oa}}) {
      auto a = oracle::temporal_attend(params, name, s, oracle::rows_of(*o), 4);
      want.insert(want.end(), a.context.begin(), a.context.end());
    }
    EXPECT_LT(oracle::max_diff(values_of(out.representation.value()), want), 1e-12);
  }
}

}  // namespace
}  // namespace hmeqa
