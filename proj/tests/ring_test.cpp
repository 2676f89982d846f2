#include <gtest/gtest.h>

#include <algorithm>
#include <tuple>

#include "ringbreak/ring.hpp"
#include "ringbreak/zoo.hpp"

namespace rb = ringbreak;

namespace {

rb::JointInput bits(std::initializer_list<int> v) {
  std::vector<rb::Bytes> in;
  for (int b : v) in.push_back(rb::Bytes{static_cast<std::uint8_t>(b)});
  return rb::make_joint_input(in);
}

// Writes random bytes to both ring neighbours every round and never halts.
class Spewer : public rb::PartyProgram {
 public:
  explicit Spewer(rb::PartyId role) : role_(role) {}
  std::string role() const override { return "spewer"; }
  std::vector<rb::PartyId> peers() const override { return {(role_ + 1) % 3, (role_ + 2) % 3}; }
  rb::PartyState init(rb::Bytes input, rb::CoinStream coins) const override {
    rb::PartyState s;
    s.input = std::move(input);
    s.coins = coins;
    return s;
  }
  rb::StepResult step(const rb::PartyState& st, rb::Round round, const rb::Inbox&) const override {
    rb::StepResult r{st, {}};
    auto noise = rb::derive_coins(round * 3 + role_, "spew");
    for (auto p : peers()) r.outbox[p] = noise.take(1 + noise.next_below(16));
    return r;
  }

 private:
  rb::PartyId role_;
};

// Role A outputs its first coin bit; B and C output 0. One round.
class CoinBitProgram : public rb::HaltingProgram {
 public:
  using HaltingProgram::HaltingProgram;

 protected:
  void run(rb::PartyState& s, rb::Round, const rb::Inbox&, rb::Outbox&) const override {
    s.outcome = rb::Outcome::byte(self() == 0 ? static_cast<std::uint8_t>(s.coins.next_byte() & 1) : 0);
  }
};

rb::ProtocolSpec coin_bit_spec() {
  rb::ProtocolSpec spec;
  spec.name = "coin-bit";
  spec.q = 1;
  for (rb::PartyId i = 0; i < 3; ++i) spec.programs.push_back(std::make_shared<CoinBitProgram>(i, 3));
  return spec;
}

using Edge = std::tuple<rb::Round, rb::PartyId, rb::PartyId, rb::Bytes>;

}  // namespace

TEST(Ring, TwoCopiesFormSixCycle) {
  rb::RingNetwork ring(rb::zoo::xor_exchange(3), 2);
  ASSERT_EQ(ring.size(), 6u);
  const std::vector<std::string> labels{"A^1", "B^1", "C^1", "A^2", "B^2", "C^2"};
  for (rb::NodeId i = 0; i < 6; ++i) EXPECT_EQ(ring.label(i), labels[i]);
  for (rb::NodeId i = 0; i < 6; ++i) {
    for (rb::NodeId j = 0; j < 6; ++j) {
      const bool adjacent = (i + 1) % 6 == j || (j + 1) % 6 == i;
      EXPECT_EQ(ring.topology().has_edge(i, j), adjacent) << i << "," << j;
    }
  }
  EXPECT_TRUE(ring.topology().has_edge(5, 0));
}

TEST(Ring, DistanceOnThirtyCycle) {
  rb::RingNetwork ring(rb::zoo::xor_exchange(3), 10);
  const auto a1 = ring.index(rb::Role::A, 1);
  const auto a5 = ring.index(rb::Role::A, 5);
  // A^1 = slot 0 and A^5 = slot 12: arcs of 12 and 18 edges.
  EXPECT_EQ(a5 - a1, 12u);
  EXPECT_EQ(ring.distance(a1, a5), 12u);
  EXPECT_EQ(ring.topology().distance(a1, a5), 12u);
}

TEST(Ring, RejectsBadShapes) {
  EXPECT_THROW(rb::RingNetwork(rb::zoo::xor_exchange(3), 1), rb::PreconditionError);
  EXPECT_THROW(rb::RingNetwork(rb::zoo::xor_exchange(4), 2), rb::PreconditionError);
}

TEST(Ring, NeighboursPresentAsTheOtherRoles) {
  rb::RingNetwork ring(rb::zoo::xor_exchange(3), 4);
  for (rb::NodeId i = 0; i < ring.size(); ++i) {
    const auto peers = ring.peer_map(i);
    ASSERT_EQ(peers.size(), 2u);
    std::set<rb::PartyId> roles;
    for (auto [role, node] : peers) {
      EXPECT_EQ(static_cast<rb::PartyId>(ring.slot(node).role), role);
      EXPECT_EQ(ring.distance(i, node), 1u);
      roles.insert(role);
    }
    EXPECT_FALSE(roles.count(static_cast<rb::PartyId>(ring.slot(i).role)));
  }
}

TEST(Ring, CopyCounts) {
  EXPECT_EQ(rb::strict_ring_copies(1), 4u);
  EXPECT_EQ(rb::strict_ring_copies(2), 4u);
  EXPECT_EQ(rb::strict_ring_copies(4), 6u);
  EXPECT_EQ(rb::strict_ring_copies(7), 8u);
  for (rb::Round q = 1; q < 30; ++q) {
    const auto m = rb::strict_ring_copies(q);
    EXPECT_EQ(m % 2, 0u);
    EXPECT_GE(m, q);
    rb::RingNetwork ring(rb::zoo::const_protocol(3, 0), m);
    // P* is out of reach of A^1, B^1, C^1 and A^2 for q rounds.
    for (rb::NodeId e : {0u, 1u, 2u, 3u}) EXPECT_GE(ring.distance(ring.p_star(), e), q);
    const auto me = rb::expected_ring_copies(q);
    EXPECT_GE(me, 2 * q);
    rb::RingNetwork ring_e(rb::zoo::const_protocol(3, 0), me);
    for (rb::NodeId e : {0u, 1u, 2u, 3u}) EXPECT_GE(ring_e.distance(ring_e.p_star(), e), me);
  }
}

TEST(EmulateRing, ConstOutputsEverywhere) {
  rb::RingNetwork ring(rb::zoo::const_protocol(3, 0), 4);
  auto run = rb::emulate_ring(ring, ring.zero_input(), 4, 9);
  ASSERT_EQ(run.slots.size(), 12u);
  for (const auto& s : run.slots) EXPECT_EQ(s.outcome, rb::Outcome::byte(0));
}

TEST(EmulateRing, Deterministic) {
  rb::RingNetwork ring(rb::zoo::echo_xor(3, 2), 4);
  auto w = ring.zero_input();
  for (rb::NodeId i = 0; i < ring.size(); i += 2) w[i].input = {1};
  auto a = rb::emulate_ring(ring, w, 8, 5);
  auto b = rb::emulate_ring(ring, w, 8, 5);
  EXPECT_EQ(a.transcript, b.transcript);
  for (std::size_t i = 0; i < a.slots.size(); ++i) EXPECT_EQ(a.slots[i].outcome, b.slots[i].outcome);
}

TEST(EmulateRing, WrongInputLengthRejected) {
  rb::RingNetwork ring(rb::zoo::echo_xor(3, 2), 4);
  EXPECT_THROW(rb::emulate_ring(ring, bits({0, 0, 0}), 4, 1), rb::PreconditionError);
}

TEST(EmulateRing, LocalityUnderDistantMutants) {
  const auto spec = rb::zoo::echo_xor(3, 2);
  const std::uint32_t m = 4;
  rb::RingNetwork base(spec, m);
  rb::RingNetwork mutated(spec, m);
  for (rb::NodeId i = 0; i < mutated.size(); ++i) {
    if (mutated.distance(i, mutated.p_star()) > m) {
      mutated.replace_program(i, std::make_shared<Spewer>(i % 3));
    }
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = rb::derive_coins(seed, "w");
    auto w = base.zero_input();
    for (auto& e : w.entries) e.input = {static_cast<std::uint8_t>(rng.next_bit())};
    auto a = rb::emulate_ring(base, w, m, seed);
    auto b = rb::emulate_ring(mutated, w, m, seed);
    EXPECT_EQ(rb::node_view(a.transcript, base.p_star()), rb::node_view(b.transcript, base.p_star()));
    EXPECT_EQ(a.slots[base.p_star()].outcome, b.slots[base.p_star()].outcome);
    ASSERT_TRUE(a.slots[base.p_star()].outcome);
  }
}

TEST(Embedding, ConstPairOutputsConstant) {
  auto spec = rb::zoo::const_protocol(3, 0);
  auto adv = rb::neighbor_embedding_adversary_at_copy(spec, 4, 2);
  auto r = rb::run_with_adversary(spec, *adv, rb::zero_joint_input(spec), 3);
  EXPECT_EQ(r.parties[0].outcome, rb::Outcome::byte(0));
  EXPECT_EQ(r.parties[1].outcome, rb::Outcome::byte(0));
  EXPECT_THROW(rb::neighbor_embedding_adversary_at_copy(spec, 4, 0), rb::PreconditionError);
  EXPECT_THROW(rb::neighbor_embedding_adversary_at_copy(spec, 4, 5), rb::PreconditionError);
}

TEST(Embedding, ViewMatchesRingSlotsUnderCoupledCoins) {
  const auto spec = rb::zoo::echo_xor(3, 2);
  const std::uint32_t m = 4;
  rb::RingNetwork ring(spec, m);
  for (std::uint32_t j = 1; j <= m; ++j) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto rng = rb::derive_coins(seed, "coupling");
      auto w = ring.zero_input();
      for (auto& e : w.entries) e.input = {static_cast<std::uint8_t>(rng.next_bit())};
      const rb::NodeId a = ring.index(rb::Role::A, j);
      const rb::NodeId b = ring.index(rb::Role::B, j);
      auto real_in = bits({rng.next_bit(), rng.next_bit(), 0});
      // The real parties draw coins under "P1"/"P2"; the coupled ring uses
      // the same labels and seed at A^j, B^j.
      w[a] = real_in[0];
      w[b] = real_in[1];

      auto adv = rb::neighbor_embedding_adversary_at_copy(spec, m, j, w, seed);
      auto real = rb::run_with_adversary(spec, *adv, real_in, seed);
      auto sim = rb::emulate_ring(ring, w, spec.q, seed);

      std::vector<Edge> real_edges, ring_edges;
      for (const auto& msg : real.transcript) {
        if (msg.from < 2 || msg.to < 2) real_edges.emplace_back(msg.round, msg.from, msg.to, msg.payload);
      }
      for (const auto& msg : sim.transcript) {
        if (msg.round > real.rounds) continue;
        if (msg.from != a && msg.from != b && msg.to != a && msg.to != b) continue;
        ring_edges.emplace_back(msg.round, static_cast<rb::PartyId>(ring.slot(msg.from).role),
                                static_cast<rb::PartyId>(ring.slot(msg.to).role), msg.payload);
      }
      std::sort(real_edges.begin(), real_edges.end());
      std::sort(ring_edges.begin(), ring_edges.end());
      EXPECT_EQ(real_edges, ring_edges) << "j=" << j << " seed=" << seed;
      EXPECT_EQ(real.parties[0].outcome, sim.slots[a].outcome);
      EXPECT_EQ(real.parties[1].outcome, sim.slots[b].outcome);
    }
  }
}

TEST(Embedding, XorPairDisagreesLikeRingNeighbours) {
  const auto spec = rb::zoo::xor_exchange(3);
  const std::uint32_t m = 4;
  rb::RingNetwork ring(spec, m);
  const std::size_t trials = 1000;
  std::size_t real_split = 0, ring_split = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto seed = rb::derive_seed(77, i);
    auto in = rb::random_joint_input(spec, seed);
    auto w = ring.zero_input();
    auto rng = rb::derive_coins(seed, "ring-w");
    for (auto& e : w.entries) e.input = {static_cast<std::uint8_t>(rng.next_bit())};
    w[1].input = in[1].input;
    w[0].input = in[0].input;

    auto adv = rb::neighbor_embedding_adversary(spec, m, 0, w, seed);
    auto r = rb::run_with_adversary(spec, *adv, in, seed);
    real_split += *r.parties[0].outcome != *r.parties[1].outcome;

    auto run = rb::emulate_ring(ring, w, spec.q, seed);
    ring_split += *run.slots[0].outcome != *run.slots[1].outcome;
  }
  const auto ci_real = rb::wilson_interval(real_split, trials);
  const auto ci_ring = rb::wilson_interval(ring_split, trials);
  EXPECT_LE(ci_real.lo, ci_ring.hi);
  EXPECT_LE(ci_ring.lo, ci_real.hi);
}

TEST(Phase1, StrictConstGivesConstant) {
  auto r = rb::phase1_strict(rb::zoo::const_protocol(3, 7), 1);
  EXPECT_EQ(r.y_star, rb::Outcome::byte(7));
  EXPECT_FALSE(r.aborted);
  EXPECT_EQ(r.iterations_used, 1u);
}

TEST(Phase1, StrictIsDeterministic) {
  auto spec = rb::zoo::echo_xor(3, 2);
  auto a = rb::phase1_strict(spec, 42);
  auto b = rb::phase1_strict(spec, 42);
  EXPECT_EQ(a.y_star, b.y_star);
  EXPECT_EQ(a.ring_seed, b.ring_seed);
}

TEST(Phase1, StrictYStarIsCoinOfPStar) {
  auto spec = coin_bit_spec();
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    auto r = rb::phase1_strict(spec, seed);
    ASSERT_EQ(r.m(), 4u);
    ASSERT_EQ(r.ring->label(r.p_star), "A^3");
    auto coins = rb::derive_coins(rb::derive_seed(seed, "phase1/1"), "A^3");
    const auto expected = static_cast<std::uint8_t>(coins.next_byte() & 1);
    EXPECT_EQ(r.y_star, rb::Outcome::byte(expected));
    seen.insert(expected);
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(Phase1, ExpectedConstNeverAborts) {
  auto r = rb::phase1_expected(rb::zoo::const_protocol(3, 0), 3, 5);
  EXPECT_FALSE(r.aborted);
  EXPECT_EQ(r.iterations_used, 1u);
  EXPECT_EQ(r.y_star, rb::Outcome::byte(0));
  EXPECT_THROW(rb::phase1_expected(rb::zoo::const_protocol(3, 0), 0, 5), rb::PreconditionError);
}

TEST(Phase1, ExpectedRespectsIterationBudgetAndRoundCap) {
  auto spec = rb::zoo::geom_halt(3, rb::zoo::geom_halt_rate_for(6, 0.5), 3);
  std::size_t aborted = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto r = rb::phase1_expected(spec, 2, seed);
    EXPECT_LE(r.iterations_used, 2u);
    if (r.aborted) {
      ++aborted;
      EXPECT_FALSE(r.y_star);
      EXPECT_EQ(r.iterations_used, 2u);
    } else {
      EXPECT_TRUE(r.y_star);
      EXPECT_LE(r.p_star_halted_at, r.m());
    }
  }
  EXPECT_GT(aborted, 0u);
  EXPECT_LT(aborted, 200u);
}

TEST(Attack, ConstForcedForThreeAndFiveParties) {
  for (std::uint8_t c : {0, 7}) {
    for (auto [n, t] : {std::pair<std::size_t, std::size_t>{3, 1}, {5, 2}}) {
      auto spec = rb::zoo::const_protocol(n, c);
      rb::AttackExperimentConfig cfg;
      cfg.t = t;
      cfg.trials = 100;
      cfg.delta_trials = 100;
      auto rep = rb::run_attack_experiment(spec, cfg);
      EXPECT_EQ(rep.successes, 100u);
      EXPECT_EQ(rep.first_y_star, rb::Outcome::byte(c));
      EXPECT_EQ(rep.delta.delta_hat, 0.0);
    }
  }
}

TEST(Attack, PreAnnouncementDoesNotDependOnCorruptedRole) {
  auto spec = rb::zoo::echo_xor(3, 2);
  auto phase1 = rb::phase1_strict(spec, 11);
  for (const std::set<rb::PartyId>& I :
       {std::set<rb::PartyId>{0}, std::set<rb::PartyId>{1}, std::set<rb::PartyId>{2}, std::set<rb::PartyId>{0, 1}}) {
    auto adv = rb::attack_adversary(spec, phase1, I);
    // Announced before any step is taken.
    auto inst = adv->start(spec, rb::zero_joint_input(spec), 3, {});
    auto announced = inst->pre_announce();
    ASSERT_TRUE(announced);
    rb::Bytes expected{'v'};
    expected.insert(expected.end(), phase1.y_star->bytes().begin(), phase1.y_star->bytes().end());
    EXPECT_EQ(*announced, expected);
  }
  EXPECT_THROW(rb::attack_adversary(spec, phase1, {}), rb::PreconditionError);
  EXPECT_THROW(rb::attack_adversary(spec, phase1, {0, 1, 2}), rb::PreconditionError);
}

TEST(Attack, HonestPlacementsAreAdjacentAndRoleCorrect) {
  rb::RingNetwork ring(rb::zoo::xor_exchange(3), 4);
  for (rb::PartyId c = 0; c < 3; ++c) {
    auto p = rb::honest_placement(ring, {c});
    ASSERT_EQ(p.size(), 2u);
    std::vector<rb::NodeId> slots;
    for (auto [role, slot] : p) {
      EXPECT_EQ(static_cast<rb::PartyId>(ring.slot(slot).role), role);
      slots.push_back(slot);
    }
    EXPECT_EQ(ring.distance(slots[0], slots[1]), 1u);
  }
}

TEST(Partition, SizesFollowTheReduction) {
  auto p = rb::partition_to_three(9, 3, {6, 7, 8});
  EXPECT_EQ(p.b1, (std::vector<rb::PartyId>{0, 1, 2}));
  EXPECT_EQ(p.b2, (std::vector<rb::PartyId>{3, 4, 5}));
  EXPECT_EQ(p.corrupt.size(), 3u);

  p = rb::partition_to_three(5, 2, {4});
  EXPECT_EQ(p.b1.size(), 2u);
  EXPECT_EQ(p.b2.size(), 2u);
  EXPECT_EQ(p.corrupt.size(), 1u);

  p = rb::partition_to_three(6, 3, {5});
  EXPECT_EQ(p.b1.size(), 3u);
  EXPECT_EQ(p.b2.size(), 2u);
  EXPECT_EQ(p.corrupt.size(), 1u);

  p = rb::partition_to_three(7, 4, {0});
  EXPECT_EQ(p.b1, (std::vector<rb::PartyId>{1, 2, 3}));
  EXPECT_EQ(p.b2, (std::vector<rb::PartyId>{4, 5, 6}));
}

TEST(Partition, CoversEveryPartyOnce) {
  for (std::size_t n = 3; n <= 12; ++n) {
    for (std::size_t t = (n + 2) / 3; t < n; ++t) {
      const auto I = rb::default_corrupted(n, t);
      auto p = rb::partition_to_three(n, t, I);
      std::vector<rb::PartyId> all;
      for (std::size_t g = 0; g < 3; ++g) all.insert(all.end(), p.group(g).begin(), p.group(g).end());
      std::sort(all.begin(), all.end());
      ASSERT_EQ(all.size(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
      if (2 * t < n) {
        EXPECT_EQ(p.b1.size(), t);
        EXPECT_EQ(p.b2.size(), t);
      } else {
        EXPECT_EQ(p.b1.size(), n / 2);
        EXPECT_EQ(p.b2.size(), (n - 1) / 2);
      }
    }
  }
}

TEST(Partition, WrongCorruptedSizeRejected) {
  EXPECT_THROW(rb::partition_to_three(9, 3, {7, 8}), rb::PreconditionError);
  EXPECT_THROW(rb::partition_to_three(9, 2, {6, 7, 8, 5, 4}), rb::PreconditionError);
  EXPECT_THROW(rb::partition_to_three(6, 3, {4, 5}), rb::PreconditionError);
}

TEST(Fuse, ConstFiveParty) {
  auto spec = rb::zoo::const_protocol(5, 0);
  auto part = rb::partition_to_three(5, 2, {4});
  auto fused = rb::fuse_parties(spec, part);
  ASSERT_EQ(fused.n(), 3u);
  auto r = rb::run_honest(fused, rb::fuse_inputs(spec, part, rb::zero_joint_input(spec)), 1);
  for (const auto& p : r.parties) EXPECT_EQ(p.outcome, rb::Outcome::byte(0));
}

TEST(Fuse, XorOfFiveBits) {
  auto spec = rb::zoo::xor_exchange(5);
  auto part = rb::partition_to_three(5, 2, {4});
  auto fused = rb::fuse_parties(spec, part);
  auto in = bits({1, 1, 0, 0, 1});
  auto r = rb::run_honest(fused, rb::fuse_inputs(spec, part, in), 1);
  for (const auto& p : r.parties) EXPECT_EQ(p.outcome, rb::Outcome::byte(1));
}

TEST(Fuse, RoundCountMatchesOriginal) {
  for (const char* sel : {"xor_exchange", "echo_xor:2", "fair_coin", "const:3"}) {
    auto spec = rb::zoo::make_protocol(sel, 5);
    auto part = rb::partition_to_three(5, 2, {4});
    auto fused = rb::fuse_parties(spec, part);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto in = rb::random_joint_input(spec, seed);
      auto orig = rb::run_honest(spec, in, seed);
      auto f = rb::run_honest(fused, rb::fuse_inputs(spec, part, in), seed);
      EXPECT_EQ(orig.rounds, f.rounds) << sel;
    }
  }
}

TEST(Fuse, PartitionMustCoverAllParties) {
  auto spec = rb::zoo::xor_exchange(5);
  rb::Partition p{{0, 1}, {2}, {4}};
  EXPECT_THROW(rb::fuse_parties(spec, p), rb::PreconditionError);
}

TEST(Attack, FivePartyConstAllHonestForced) {
  auto spec = rb::zoo::const_protocol(5, 0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto a = rb::attack_n_party(spec, 2, {4}, seed);
    ASSERT_TRUE(a.adversary);
    auto r = rb::run_with_adversary(spec, *a.adversary, rb::zero_joint_input(spec), seed);
    for (auto h : r.honest()) EXPECT_EQ(r.parties[h].outcome, rb::Outcome::byte(0));
  }
}

TEST(Attack, NoHonestMajorityUsesSingleCorruption) {
  auto spec = rb::zoo::xor_exchange(6);
  auto a = rb::attack_n_party(spec, 3, {5}, 4);
  ASSERT_TRUE(a.adversary);
  EXPECT_EQ(a.adversary->corrupted(), (std::set<rb::PartyId>{5}));
  auto r = rb::run_with_adversary(spec, *a.adversary, rb::zero_joint_input(spec), 4);
  EXPECT_EQ(r.honest().size(), 5u);
  for (auto h : r.honest()) EXPECT_TRUE(r.parties[h].outcome);
}

TEST(Attack, FivePartyEchoXorRunsAndReports) {
  auto spec = rb::zoo::echo_xor(5, 2);
  rb::AttackExperimentConfig cfg;
  cfg.t = 2;
  cfg.trials = 200;
  cfg.delta_trials = 200;
  cfg.jobs = 2;
  auto rep = rb::run_attack_experiment(spec, cfg);
  EXPECT_EQ(rep.corrupted, (std::set<rb::PartyId>{4}));
  EXPECT_EQ(rep.trials, 200u);
  EXPECT_EQ(rep.aborts, 0u);
  EXPECT_NEAR(rep.margin, rep.success_rate - rep.bound, 1e-12);
}

TEST(Attack, ExperimentIsReproducibleAcrossJobCounts) {
  auto spec = rb::zoo::echo_xor(3, 2);
  rb::AttackExperimentConfig cfg;
  cfg.trials = 200;
  cfg.delta_trials = 100;
  cfg.seed = 9;
  auto a = rb::run_attack_experiment(spec, cfg);
  cfg.jobs = 4;
  auto b = rb::run_attack_experiment(spec, cfg);
  EXPECT_EQ(a.successes, b.successes);
  EXPECT_EQ(a.y_star_histogram, b.y_star_histogram);
  EXPECT_EQ(a.delta.delta_hat, b.delta.delta_hat);
}
