#include <gtest/gtest.h>

#include "ringbreak/compiler.hpp"

namespace rb = ringbreak;

namespace {

const rb::Outcome kOne = rb::Outcome::value("1");
const rb::Outcome kZero = rb::Outcome::value("0");

rb::Assignment bits_of(unsigned mask, std::size_t n) {
  rb::Assignment x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = (mask >> i) & 1u;
  return x;
}

}  // namespace

TEST(FullIdeal, OrExamples) {
  auto f = rb::or_table(3);
  auto r = rb::full_ideal_exec(f, {{0, 0}, {1, 0}}, {{2, 1}});
  for (const auto& o : r.outputs) EXPECT_EQ(o, kOne);

  r = rb::full_ideal_exec(f, {{0, 0}, {1, 0}}, {{2, std::int64_t{7}}});
  EXPECT_EQ(r.effective, (rb::Assignment{0, 0, 0}));
  for (const auto& o : r.outputs) EXPECT_EQ(o, kZero);

  r = rb::full_ideal_exec(f, {{0, 0}, {1, 0}}, {{2, std::nullopt}});
  EXPECT_EQ(r.outputs[0], kZero);

  auto c = rb::constant_table({2, 3, 2}, "5");
  r = rb::full_ideal_exec(c, {{0, 1}}, {{1, 2}, {2, -4}});
  for (const auto& o : r.outputs) EXPECT_EQ(o, rb::Outcome::value("5"));

  EXPECT_THROW(rb::full_ideal_exec(f, {{0, 0}}, {{2, 1}}), rb::PreconditionError);
  EXPECT_THROW(rb::full_ideal_exec(f, {{0, 0}, {1, 0}}, {{1, 1}, {2, 1}}), rb::PreconditionError);
}

TEST(ThresholdIdeal, AbortRules) {
  rb::ThresholdIdealConfig cfg{rb::or_table(6), 1, 2, {}};
  const std::map<rb::PartyId, std::uint32_t> four{{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  auto r = rb::threshold_ideal_exec(cfg, four, rb::IdealDecision::abort_all(), {4, 5});
  EXPECT_TRUE(r.aborted);
  ASSERT_EQ(r.outputs.size(), 6u);
  for (const auto& o : r.outputs) EXPECT_TRUE(o.is_bot());

  EXPECT_THROW(rb::threshold_ideal_exec(cfg, {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}, rb::IdealDecision::abort_all(), {5}),
               rb::IllegalAbort);

  rb::IdealDecision d;
  d.inputs = {{4, 1}, {5, 1}};
  r = rb::threshold_ideal_exec(cfg, four, d, {4, 5});
  for (const auto& o : r.outputs) EXPECT_EQ(o, kOne);

  EXPECT_THROW(rb::threshold_ideal_exec(cfg, {{0, 0}, {1, 0}, {2, 0}}, d, {3, 4, 5}), rb::PreconditionError);
  rb::ThresholdIdealConfig bad{rb::or_table(6), 2, 2, {}};
  EXPECT_THROW(bad.validate(), rb::PreconditionError);
}

TEST(WrapperParams, InequalitiesHoldUpToFifty) {
  for (std::size_t n = 3; n <= 50; ++n) {
    for (std::size_t t = 1; t < n; ++t) {
      const bool in_range = 3 * t >= n && 2 * t < n;
      if (!in_range) {
        EXPECT_THROW(rb::wrapper_params(n, t), rb::PreconditionError) << n << "," << t;
        continue;
      }
      if (n - 2 * t == 1) {
        EXPECT_THROW(rb::wrapper_params(n, t), rb::UnsupportedSubcase) << n << "," << t;
        continue;
      }
      auto p = rb::wrapper_params(n, t);
      EXPECT_EQ(p.t1, n - 2 * t - 1);
      EXPECT_EQ(p.t2, t);
      EXPECT_LE(p.t1, p.t2);
      EXPECT_LT(p.t1 + 2 * p.t2, n);
    }
  }
}

TEST(Wrap, RejectsNonDominatedAndUnsupported) {
  EXPECT_THROW(rb::wrap_dominated(rb::xor_table(9), 3), rb::NotDominated);
  EXPECT_THROW(rb::wrap_dominated(rb::or_table(5), 2), rb::UnsupportedSubcase);
}

TEST(Wrap, NinePartyHonestRunIsTableLookup) {
  auto f = rb::threshold_table(9, 3);
  auto w = rb::wrap_dominated(f, 3);
  EXPECT_EQ(w.y_star, "1");
  EXPECT_EQ(w.oracle.t1, 2u);
  EXPECT_EQ(w.oracle.t2, 3u);
  const std::set<rb::PartyId> I{6, 7, 8};
  for (unsigned mask = 0; mask < 512; mask += 7) {
    const auto x = bits_of(mask, 9);
    rb::HybridAdversary keep{I};
    auto j = rb::real_execution(w, keep, x, {});
    const auto expected = rb::Outcome::value(f.at(x));
    for (const auto& o : j.first) EXPECT_EQ(o, expected);
  }
}

TEST(Wrap, AbortAlwaysYieldsYStar) {
  auto w = rb::wrap_dominated(rb::threshold_table(9, 3), 3);
  for (const std::set<rb::PartyId>& I : {std::set<rb::PartyId>{0, 1, 2}, std::set<rb::PartyId>{2, 5, 8}}) {
    rb::HybridAdversary adv{I, rb::HybridAdversary::Abort::always};
    for (unsigned mask = 0; mask < 512; mask += 5) {
      auto j = rb::real_execution(w, adv, bits_of(mask, 9), {});
      ASSERT_EQ(j.first.size(), 6u);
      for (const auto& o : j.first) EXPECT_EQ(o, kOne);
      EXPECT_EQ(j, rb::ideal_execution(w, adv, bits_of(mask, 9), {}));
    }
  }
}

TEST(Wrap, SmallCorruptionCannotAbort) {
  auto w = rb::wrap_dominated(rb::threshold_table(9, 3), 3);
  rb::HybridAdversary adv{{7, 8}, rb::HybridAdversary::Abort::always};
  EXPECT_THROW(rb::real_execution(w, adv, bits_of(0, 9), {}), rb::IllegalAbort);
  EXPECT_THROW(rb::ideal_execution(w, adv, bits_of(0, 9), {}), rb::IllegalAbort);
}

TEST(Wrap, NeverBotOverEveryDecision) {
  // Every decision a 3-party corruption can make: abort, or any of the 4^3
  // submissions (0, 1, out of domain, missing) per corrupted party.
  auto f = rb::threshold_table(9, 3);
  auto w = rb::wrap_dominated(f, 3);
  const std::set<rb::PartyId> I{3, 4, 5};
  const std::vector<rb::SubmittedInput> choices{std::int64_t{0}, std::int64_t{1}, std::int64_t{2}, std::nullopt};
  for (unsigned mask = 0; mask < 64; ++mask) {
    std::map<rb::PartyId, std::uint32_t> honest;
    for (rb::PartyId i : {0u, 1u, 2u, 6u, 7u, 8u}) honest[i] = (mask >> (i % 6)) & 1u;
    for (auto o : w.run(honest, rb::IdealDecision::abort_all(), I)) EXPECT_FALSE(o.second.is_bot());
    for (unsigned d = 0; d < 64; ++d) {
      rb::IdealDecision dec;
      unsigned c = d;
      for (auto i : I) {
        dec.inputs[i] = choices[c % 4];
        c /= 4;
      }
      for (auto o : w.run(honest, dec, I)) EXPECT_FALSE(o.second.is_bot());
    }
  }
}

TEST(Simulator, ForcingInputsForceYStar) {
  auto f = rb::threshold_table(9, 3);
  auto w = rb::wrap_dominated(f, 3);
  for (const std::set<rb::PartyId>& I : {std::set<rb::PartyId>{0, 4, 8}, std::set<rb::PartyId>{6, 7, 8}}) {
    auto x = w.forcing_inputs(I);
    std::vector<rb::PartyId> sub(I.begin(), I.end());
    rb::Assignment a;
    for (auto i : sub) a.push_back(x.at(i));
    EXPECT_EQ(rb::forced_value(f, sub, a), w.y_star);
  }
}

TEST(RealIdeal, ExactDistanceZeroForFiniteAdversaries) {
  auto w = rb::wrap_dominated(rb::threshold_table(9, 3), 3);
  using A = rb::HybridAdversary;
  const std::set<rb::PartyId> I{6, 7, 8};
  const std::vector<A> advs{
      A{I},
      A{I, A::Abort::never, 1, A::Substitution::flip},
      A{I, A::Abort::never, 1, A::Substitution::constant, 1},
      A{I, A::Abort::never, 1, A::Substitution::out_of_domain},
      A{I, A::Abort::never, 1, A::Substitution::missing},
      A{I, A::Abort::never, 1, A::Substitution::random},
      A{I, A::Abort::coin, 1, A::Substitution::keep},
      A{I, A::Abort::coin, 2, A::Substitution::random},
      A{{1, 2}, A::Abort::never, 1, A::Substitution::flip},
  };
  for (const auto& adv : advs) {
    for (unsigned mask : {0u, 0x1ffu, 0x0a5u}) {
      auto c = rb::compare_real_ideal_exact(w, adv, bits_of(mask, 9));
      EXPECT_TRUE(c.exact);
      EXPECT_EQ(c.distance, 0.0);
      EXPECT_EQ(c.real_bot, 0u);
    }
  }
}

TEST(RealIdeal, CoinAbortIsTheMixture) {
  auto w = rb::wrap_dominated(rb::threshold_table(9, 3), 3);
  rb::HybridAdversary adv{{6, 7, 8}, rb::HybridAdversary::Abort::coin};
  // Inputs with output 0: the aborting half must move to y* = 1.
  auto c = rb::compare_real_ideal_exact(w, adv, bits_of(0, 9));
  EXPECT_EQ(c.samples, 2u);
  EXPECT_EQ(c.real_support, 2u);
  EXPECT_EQ(c.distance, 0.0);
}

TEST(RealIdeal, SampledDistanceSmall) {
  auto w = rb::wrap_dominated(rb::threshold_table(9, 3), 3);
  rb::HybridAdversary adv{{6, 7, 8}, rb::HybridAdversary::Abort::coin, 1, rb::HybridAdversary::Substitution::random};
  auto c = rb::compare_real_ideal_sampled(w, adv, bits_of(0x013, 9), 20000, 3, 2);
  EXPECT_FALSE(c.exact);
  EXPECT_LT(c.distance, 0.03);
  EXPECT_EQ(c.real_bot, 0u);
}
