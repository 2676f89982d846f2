#pragma once

// Ring composition of a three-party protocol and the output-forcing attacks
// built on it.
//
// A ring of m copies places 3m slots A^1 B^1 C^1 ... A^m B^m C^m on a cycle.
// Each slot runs the program of its role and believes its two cycle
// neighbours are the other two roles of the original protocol. The attack
// first runs the ring on adversarially chosen coins to learn the output y*
// of a far-away slot P*, then embeds the real honest parties into two
// adjacent slots of the same ring while simulating every other slot. Slots
// further than P*'s halting round from the embedded parties cannot influence
// P*, so P* still outputs y*, and consistency along the ring drags the
// honest parties towards y*.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ringbreak/core.hpp"
#include "ringbreak/netsim.hpp"
#include "ringbreak/parallel.hpp"
#include "ringbreak/stats.hpp"

namespace ringbreak {

enum class Role : std::uint8_t { A = 0, B = 1, C = 2 };

inline char role_char(Role r) { return static_cast<char>('A' + static_cast<int>(r)); }

struct Slot {
  Role role;
  std::uint32_t copy;  // 1-based
};

// ---------------------------------------------------------------------------
// RingNetwork

class RingNetwork {
 public:
  RingNetwork(ProtocolSpec spec3, std::uint32_t m) : spec_(std::move(spec3)), m_(m) {
    if (spec_.n() != 3) throw PreconditionError("ring composition needs a three-party protocol");
    if (m_ < 2) throw PreconditionError("ring needs at least two copies (m >= 2)");
    topo_ = Topology::cycle(size());
    for (NodeId i = 0; i < size(); ++i) programs_.push_back(spec_.programs[i % 3]);
  }

  const ProtocolSpec& spec() const { return spec_; }
  std::uint32_t m() const { return m_; }
  std::size_t size() const { return 3 * static_cast<std::size_t>(m_); }
  const Topology& topology() const { return topo_; }

  Slot slot(NodeId i) const { return {static_cast<Role>(i % 3), i / 3 + 1}; }
  NodeId index(Role r, std::uint32_t copy) const { return 3 * (copy - 1) + static_cast<NodeId>(r); }
  std::string label(NodeId i) const { return std::string(1, role_char(slot(i).role)) + "^" + std::to_string(slot(i).copy); }

  std::size_t distance(NodeId a, NodeId b) const {
    const std::size_t d = a > b ? a - b : b - a;
    return std::min(d, size() - d);
  }

  /// The observed slot A^{m/2+1}, antipodal to the embedding positions.
  NodeId p_star() const { return index(Role::A, m_ / 2 + 1); }

  /// The slot's program sees role (R+1) mod 3 on its successor and
  /// (R+2) mod 3 on its predecessor.
  std::map<PartyId, NodeId> peer_map(NodeId i) const {
    const auto r = static_cast<PartyId>(i % 3);
    const auto n = static_cast<NodeId>(size());
    return {{(r + 1) % 3, (i + 1) % n}, {(r + 2) % 3, (i + n - 1) % n}};
  }

  const std::shared_ptr<const PartyProgram>& program(NodeId i) const { return programs_.at(i); }

  /// Swaps the program of one slot (mutation experiments).
  void replace_program(NodeId i, std::shared_ptr<const PartyProgram> p) { programs_.at(i) = std::move(p); }

  NodeBinding binding(NodeId i, const PartyInput& in) const { return {programs_.at(i), peer_map(i), in}; }

  /// Zero inputs of kappa bytes, coin labels equal to the slot labels.
  JointInput zero_input() const {
    JointInput w;
    for (NodeId i = 0; i < size(); ++i) w.entries.push_back({Bytes(spec_.kappa, 0), label(i)});
    return w;
  }

 private:
  ProtocolSpec spec_;
  std::uint32_t m_;
  Topology topo_;
  std::vector<std::shared_ptr<const PartyProgram>> programs_;
};

inline RingNetwork build_ring(const ProtocolSpec& spec3, std::uint32_t m) { return RingNetwork(spec3, m); }

/// Smallest even m >= base whose antipodal slot stays at least `horizon`
/// edges away from the embedding positions A^1..A^2.
inline std::uint32_t ring_copies_for(Round base, Round horizon) {
  std::uint32_t m = std::max<std::uint32_t>(2, base);
  if (m % 2) ++m;
  while (3 * m / 2 < horizon + 3) m += 2;
  return m;
}

/// m for the strict attack: at least q copies, P* unreachable within q rounds.
inline std::uint32_t strict_ring_copies(Round q) { return ring_copies_for(q, q); }

/// m for the expected attack: at least 2q copies, P* unreachable within m rounds.
inline std::uint32_t expected_ring_copies(Round q_expected) {
  std::uint32_t m = ring_copies_for(2 * q_expected, 0);
  while (3 * m / 2 < m + 3) m += 2;
  return m;
}

// ---------------------------------------------------------------------------
// Ring emulation

struct RingRun {
  std::vector<PartyResult> slots;
  Transcript transcript;
  Round rounds = 0;
};

inline RingRun emulate_ring(const RingNetwork& ring, const JointInput& w, Round rounds_cap, std::uint64_t seed,
                            std::optional<NodeId> stop_when_halted = {}) {
  if (w.size() != ring.size()) throw PreconditionError("ring input must have 3m entries");
  std::vector<std::optional<NodeBinding>> nodes;
  for (NodeId i = 0; i < ring.size(); ++i) nodes.emplace_back(ring.binding(i, w[i]));
  LockstepEngine engine(ring.topology(), std::move(nodes), {seed, 4096, ring.spec().coin_budget});
  while (engine.round() < rounds_cap && !engine.all_internal_halted()) {
    engine.advance({});
    if (stop_when_halted && engine.halted(*stop_when_halted)) break;
  }
  RingRun run;
  for (NodeId i = 0; i < ring.size(); ++i) run.slots.push_back(engine.result(i));
  run.transcript = engine.transcript();
  run.rounds = engine.round();
  return run;
}

/// Messages sent or received by `node`.
inline Transcript node_view(const Transcript& t, NodeId node) {
  Transcript out;
  for (const auto& m : t)
    if (m.from == node || m.to == node) out.push_back(m);
  return out;
}

// ---------------------------------------------------------------------------
// Bridging real parties into ring slots

/// Translates between the real protocol's messages and messages on the ring
/// at the embedding positions.
class RingBridge {
 public:
  virtual ~RingBridge() = default;
  /// Real external slots of the ring.
  virtual std::set<NodeId> external_slots() const = 0;
  /// Real honest->corrupted traffic of round r as slot traffic into the ring.
  virtual std::vector<Message> to_slots(const std::vector<Message>& real) const = 0;
  /// Simulated-slot traffic to external slots as real corrupted->honest traffic.
  virtual std::vector<Message> to_real(const std::vector<Message>& slots) const = 0;
};

/// Three-party embedding: real party of role R sits on slot `placement[R]`.
class DirectBridge : public RingBridge {
 public:
  DirectBridge(std::shared_ptr<const RingNetwork> ring, std::map<PartyId, NodeId> placement)
      : ring_(std::move(ring)), placement_(std::move(placement)) {
    for (auto [party, slot] : placement_) {
      if (ring_->slot(slot).role != static_cast<Role>(party)) throw PreconditionError("placement role mismatch");
      by_slot_[slot] = party;
    }
  }

  std::set<NodeId> external_slots() const override {
    std::set<NodeId> s;
    for (auto [slot, party] : by_slot_) s.insert(slot);
    return s;
  }

  std::vector<Message> to_slots(const std::vector<Message>& real) const override {
    std::vector<Message> out;
    for (const auto& m : real) {
      auto it = placement_.find(m.from);
      if (it == placement_.end()) continue;
      const auto peers = ring_->peer_map(it->second);
      auto target = peers.find(m.to);
      if (target == peers.end() || by_slot_.count(target->second)) continue;
      out.push_back({m.round, it->second, target->second, m.payload});
    }
    return out;
  }

  std::vector<Message> to_real(const std::vector<Message>& slots) const override {
    std::vector<Message> out;
    for (const auto& m : slots) {
      auto it = by_slot_.find(m.to);
      if (it == by_slot_.end()) continue;
      out.push_back({m.round, static_cast<NodeId>(ring_->slot(m.from).role), it->second, m.payload});
    }
    return out;
  }

 private:
  std::shared_ptr<const RingNetwork> ring_;
  std::map<PartyId, NodeId> placement_;
  std::map<NodeId, PartyId> by_slot_;
};

/// Adversary that simulates every non-embedded slot of a ring and relays the
/// embedded slots' traffic to and from the real honest parties.
class RingEmbeddingAdversary : public AdversaryStrategy {
 public:
  struct Config {
    std::string name;
    std::set<PartyId> corrupted;
    std::shared_ptr<const RingNetwork> ring;
    std::shared_ptr<const RingBridge> bridge;
    JointInput w;
    /// Coins of the simulated slots; drawn from the run seed when empty.
    std::optional<std::uint64_t> ring_seed;
    std::optional<Outcome> y_star;
  };

  explicit RingEmbeddingAdversary(Config cfg) : cfg_(std::move(cfg)) {
    if (cfg_.w.size() != cfg_.ring->size()) throw PreconditionError("ring input must have 3m entries");
  }

  std::string name() const override { return cfg_.name; }
  std::set<PartyId> corrupted() const override { return cfg_.corrupted; }
  const Config& config() const { return cfg_; }

  std::unique_ptr<AdversaryInstance> start(const ProtocolSpec&, const JointInput&, std::uint64_t seed,
                                           const Bytes&) const override {
    const auto external = cfg_.bridge->external_slots();
    std::vector<std::optional<NodeBinding>> nodes;
    for (NodeId i = 0; i < cfg_.ring->size(); ++i) {
      if (external.count(i)) {
        nodes.emplace_back();
      } else {
        nodes.emplace_back(cfg_.ring->binding(i, cfg_.w[i]));
      }
    }
    const auto ring_seed = cfg_.ring_seed.value_or(derive_seed(seed, "ring-simulation"));
    return std::make_unique<Instance>(
        LockstepEngine(cfg_.ring->topology(), std::move(nodes), {ring_seed, 4096, cfg_.ring->spec().coin_budget}),
        cfg_);
  }

 private:
  class Instance : public AdversaryInstance {
   public:
    Instance(LockstepEngine engine, const Config& cfg) : engine_(std::move(engine)), cfg_(cfg) {}

    std::optional<Bytes> pre_announce() const override {
      if (!cfg_.y_star) return std::nullopt;
      return encode(*cfg_.y_star);
    }

    std::vector<Message> step(Round round, const std::vector<Message>& inbound) override {
      auto into_ring = cfg_.bridge->to_slots(inbound);
      for (auto& m : into_ring) m.round = round - 1;
      auto out = cfg_.bridge->to_real(engine_.advance(into_ring));
      for (auto& m : out) m.round = round;
      return out;
    }

    Bytes output() const override {
      const auto r = engine_.result(cfg_.ring->p_star());
      return r.outcome ? encode(*r.outcome) : Bytes{};
    }

    const LockstepEngine& engine() const { return engine_; }

   private:
    static Bytes encode(const Outcome& o) {
      if (o.is_bot()) return to_bytes("bot");
      Bytes b{'v'};
      b.insert(b.end(), o.bytes().begin(), o.bytes().end());
      return b;
    }

    LockstepEngine engine_;
    const Config& cfg_;
  };

  Config cfg_;
};

/// The three neighbouring pair types of the ring, by the slot of their first
/// member: (A^1,B^1), (B^1,C^1), (C^1,A^2).
inline constexpr std::array<NodeId, 3> kPairPositions{0, 1, 2};

/// Adversary corrupting the third role that embeds the other two real
/// parties into slots (first, first+1) of an m-copy ring. `w_rest` and
/// `ring_seed` fix the simulated slots; by default they are zero inputs and
/// coins drawn afresh from every run's seed.
inline std::shared_ptr<RingEmbeddingAdversary> neighbor_embedding_adversary(
    const ProtocolSpec& spec3, std::uint32_t m, NodeId first, std::optional<JointInput> w_rest = {},
    std::optional<std::uint64_t> ring_seed = {}) {
  auto ring = std::make_shared<const RingNetwork>(spec3, m);
  if (first >= ring->size()) throw PreconditionError("embedding position outside the ring");
  const NodeId second = static_cast<NodeId>((first + 1) % ring->size());
  const auto r1 = static_cast<PartyId>(ring->slot(first).role);
  const auto r2 = static_cast<PartyId>(ring->slot(second).role);
  const PartyId corrupt = 3 - r1 - r2;
  RingEmbeddingAdversary::Config cfg;
  cfg.name = "neighbor-embedding(" + ring->label(first) + "," + ring->label(second) + ")";
  cfg.corrupted = {corrupt};
  cfg.ring = ring;
  cfg.bridge = std::make_shared<DirectBridge>(ring, std::map<PartyId, NodeId>{{r1, first}, {r2, second}});
  cfg.w = w_rest.value_or(ring->zero_input());
  cfg.ring_seed = ring_seed;
  return std::make_shared<RingEmbeddingAdversary>(std::move(cfg));
}

/// Embedding of the real (A,B) pair at copy j, corrupting C.
inline std::shared_ptr<RingEmbeddingAdversary> neighbor_embedding_adversary_at_copy(
    const ProtocolSpec& spec3, std::uint32_t m, std::uint32_t j, std::optional<JointInput> w_rest = {},
    std::optional<std::uint64_t> ring_seed = {}) {
  if (j < 1 || j > m) throw PreconditionError("copy index must be in [1, m]");
  return neighbor_embedding_adversary(spec3, m, 3 * (j - 1), std::move(w_rest), ring_seed);
}

/// One embedding adversary per neighbouring pair type.
inline std::vector<std::shared_ptr<const AdversaryStrategy>> neighbor_embedding_family(const ProtocolSpec& spec3,
                                                                                       std::uint32_t m) {
  std::vector<std::shared_ptr<const AdversaryStrategy>> family;
  for (auto pos : kPairPositions) family.push_back(neighbor_embedding_adversary(spec3, m, pos));
  return family;
}

struct DeltaEstimate {
  double delta_hat = 0.0;  // worst pair type
  Interval ci;
  std::size_t trials = 0;
  std::vector<ConsistencyEstimate> per_pair;
};

/// Inconsistency of honest neighbours under the neighbour-embedding family;
/// the worst pair type is reported.
inline DeltaEstimate estimate_ring_delta(const ProtocolSpec& spec3, std::uint32_t m, std::size_t trials,
                                         std::uint64_t seed, unsigned jobs = 1) {
  DeltaEstimate d;
  d.trials = trials;
  d.per_pair = estimate_consistency(spec3, neighbor_embedding_family(spec3, m), trials, seed, jobs);
  for (const auto& e : d.per_pair) {
    if (e.delta_hat >= d.delta_hat) {
      d.delta_hat = e.delta_hat;
      d.ci = e.ci;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Phase 1: choosing w and y*

struct AttackPhase1Result {
  std::shared_ptr<const RingNetwork> ring;
  std::optional<Outcome> y_star;
  JointInput w;
  std::uint64_t ring_seed = 0;
  std::uint32_t iterations_used = 0;
  bool aborted = false;
  NodeId p_star = 0;
  Round p_star_halted_at = 0;

  std::uint32_t m() const { return ring->m(); }
};

/// Strict variant: one ring run on zero inputs and uniform coins; y* is the
/// output of P*.
inline AttackPhase1Result phase1_strict(const ProtocolSpec& spec3, std::uint64_t seed,
                                        std::optional<JointInput> inputs = {}) {
  if (spec3.bound != RoundBound::strict) throw PreconditionError("phase1_strict needs a strict-round protocol");
  auto ring = std::make_shared<const RingNetwork>(spec3, strict_ring_copies(spec3.q));
  AttackPhase1Result r;
  r.ring = ring;
  r.p_star = ring->p_star();
  r.w = inputs.value_or(ring->zero_input());
  r.ring_seed = derive_seed(seed, "phase1/1");
  auto run = emulate_ring(*ring, r.w, spec3.q, r.ring_seed, r.p_star);
  const auto& p = run.slots[r.p_star];
  if (!p.outcome) throw SpecViolation(spec3.name + ": P* still running at round q=" + std::to_string(spec3.q));
  r.y_star = p.outcome;
  r.p_star_halted_at = p.halted_at;
  r.iterations_used = 1;
  return r;
}

/// Expected-round variant: up to z independent ring runs capped at m rounds;
/// the first in which P* halts fixes (y*, w). Aborts when none does.
inline AttackPhase1Result phase1_expected(const ProtocolSpec& spec3, std::uint32_t z, std::uint64_t seed) {
  if (z < 1) throw PreconditionError("phase1_expected needs z >= 1");
  auto ring = std::make_shared<const RingNetwork>(spec3, expected_ring_copies(spec3.q));
  AttackPhase1Result r;
  r.ring = ring;
  r.p_star = ring->p_star();
  r.w = ring->zero_input();
  for (std::uint32_t it = 1; it <= z; ++it) {
    const auto ring_seed = derive_seed(seed, "phase1/" + std::to_string(it));
    auto run = emulate_ring(*ring, r.w, ring->m(), ring_seed, r.p_star);
    r.iterations_used = it;
    const auto& p = run.slots[r.p_star];
    if (p.outcome) {
      r.y_star = p.outcome;
      r.ring_seed = ring_seed;
      r.p_star_halted_at = p.halted_at;
      return r;
    }
  }
  r.aborted = true;
  return r;
}

// ---------------------------------------------------------------------------
// Phase 2: forcing y*

/// Embedding positions of the honest roles for a given corrupted set:
/// {C} -> (A^1,B^1), {A} -> (B^1,C^1), {B} -> (A^2,C^1); a single honest
/// role sits on its copy-1 slot.
inline std::map<PartyId, NodeId> honest_placement(const RingNetwork& ring, const std::set<PartyId>& corrupted) {
  if (corrupted.empty() || corrupted.size() >= 3) throw PreconditionError("corrupt one or two of the three parties");
  for (auto c : corrupted)
    if (c > 2) throw PreconditionError("three-party roles are 0, 1, 2");
  std::map<PartyId, NodeId> placement;
  if (corrupted.size() == 1) {
    switch (*corrupted.begin()) {
      case 2:
        return {{0, ring.index(Role::A, 1)}, {1, ring.index(Role::B, 1)}};
      case 0:
        return {{1, ring.index(Role::B, 1)}, {2, ring.index(Role::C, 1)}};
      default:
        return {{0, ring.index(Role::A, 2)}, {2, ring.index(Role::C, 1)}};
    }
  }
  for (PartyId r = 0; r < 3; ++r)
    if (!corrupted.count(r)) placement[r] = ring.index(static_cast<Role>(r), 1);
  return placement;
}

inline std::shared_ptr<RingEmbeddingAdversary> attack_adversary(const ProtocolSpec& spec3,
                                                                const AttackPhase1Result& phase1,
                                                                const std::set<PartyId>& corrupted) {
  if (phase1.aborted) throw PreconditionError("phase 1 aborted; no y* to force");
  if (spec3.n() != 3) throw PreconditionError("attack_adversary needs a three-party protocol");
  RingEmbeddingAdversary::Config cfg;
  cfg.name = "ring-attack";
  cfg.corrupted = corrupted;
  cfg.ring = phase1.ring;
  cfg.bridge = std::make_shared<DirectBridge>(phase1.ring, honest_placement(*phase1.ring, corrupted));
  cfg.w = phase1.w;
  cfg.ring_seed = phase1.ring_seed;
  cfg.y_star = phase1.y_star;
  return std::make_shared<RingEmbeddingAdversary>(std::move(cfg));
}

// ---------------------------------------------------------------------------
// n-party to three-party reduction

struct Partition {
  std::vector<PartyId> b1;
  std::vector<PartyId> b2;
  std::vector<PartyId> corrupt;

  const std::vector<PartyId>& group(std::size_t g) const { return g == 0 ? b1 : (g == 1 ? b2 : corrupt); }
};

/// Size of the corrupted set the attack needs: n-2t below an honest
/// majority threshold, a single party otherwise.
inline std::size_t attack_set_size(std::size_t n, std::size_t t) { return 2 * t < n ? n - 2 * t : 1; }

inline Partition partition_to_three(std::size_t n, std::size_t t, const std::set<PartyId>& corrupted) {
  if (n < 3) throw PreconditionError("partition needs n >= 3");
  if (3 * t < n || t >= n) throw PreconditionError("partition needs n/3 <= t < n");
  const auto s = attack_set_size(n, t);
  if (corrupted.size() != s) {
    throw PreconditionError("corrupted set must have size " + std::to_string(s) + ", got " +
                            std::to_string(corrupted.size()));
  }
  for (auto c : corrupted)
    if (c >= n) throw PreconditionError("corrupted index out of range");
  const std::size_t first = 2 * t < n ? t : (n) / 2;  // ceil((n-1)/2) == n/2 for integers
  Partition p;
  for (PartyId i = 0; i < n; ++i) {
    if (corrupted.count(i)) {
      p.corrupt.push_back(i);
    } else if (p.b1.size() < first) {
      p.b1.push_back(i);
    } else {
      p.b2.push_back(i);
    }
  }
  return p;
}

namespace detail {

struct TaggedMessage {
  PartyId sender;
  PartyId receiver;
  Bytes payload;
};

inline Bytes encode_bundle(std::vector<TaggedMessage> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return std::tie(a.sender, a.receiver) < std::tie(b.sender, b.receiver); });
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(out, e.sender);
    put_u32(out, e.receiver);
    put_u32(out, static_cast<std::uint32_t>(e.payload.size()));
    out.insert(out.end(), e.payload.begin(), e.payload.end());
  }
  return out;
}

/// Malformed bundles decode to whatever prefix is well formed.
inline std::vector<TaggedMessage> decode_bundle(const Bytes& in) {
  std::vector<TaggedMessage> out;
  std::size_t pos = 0;
  auto count = get_u32(in, pos);
  if (!count) return out;
  for (std::uint32_t k = 0; k < *count; ++k) {
    auto s = get_u32(in, pos);
    auto r = get_u32(in, pos);
    auto len = get_u32(in, pos);
    if (!s || !r || !len || pos + *len > in.size()) break;
    out.push_back({*s, *r, Bytes(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                 in.begin() + static_cast<std::ptrdiff_t>(pos + *len))});
    pos += *len;
  }
  return out;
}

}  // namespace detail

/// A three-party program that runs a group of parties of an n-party
/// protocol. Intra-group traffic stays inside the state; traffic to other
/// groups travels as bundles tagged (sender, receiver). Halts when every
/// member halts and outputs the output of its lowest-indexed member.
class FusedProgram : public PartyProgram {
 public:
  FusedProgram(ProtocolSpec base, std::array<std::vector<PartyId>, 3> groups, std::size_t self)
      : base_(std::move(base)), groups_(std::move(groups)), self_(self) {
    for (std::size_t g = 0; g < 3; ++g)
      for (auto i : groups_[g]) group_of_[i] = g;
  }

  std::string role() const override {
    static const char* kNames[] = {"B1'", "B2'", "C'"};
    return kNames[self_];
  }

  std::vector<PartyId> peers() const override {
    std::vector<PartyId> out;
    for (PartyId g = 0; g < 3; ++g)
      if (g != self_) out.push_back(g);
    return out;
  }

  const std::vector<PartyId>& members() const { return groups_[self_]; }

  PartyState init(Bytes input, CoinStream coins) const override {
    PartyState s;
    s.input = input;
    s.coins = coins;
    const auto k = base_.kappa;
    const auto& mine = members();
    for (std::size_t idx = 0; idx < mine.size(); ++idx) {
      Bytes part(k, 0);
      for (std::size_t b = 0; b < k && idx * k + b < input.size(); ++b) part[b] = input[idx * k + b];
      const auto member_seed = s.coins.next_u64();
      s.members.push_back(base_.programs[mine[idx]]->init(
          std::move(part), derive_coins(member_seed, "P" + std::to_string(mine[idx] + 1), base_.coin_budget)));
    }
    s.regs = {detail::encode_bundle({})};
    return s;
  }

  StepResult step(const PartyState& state, Round round, const Inbox& inbox) const override {
    if (state.outcome) return {state, {}};
    StepResult r{state, {}};
    auto& s = r.state;
    const auto& mine = members();

    std::map<PartyId, Inbox> member_inbox;
    for (auto& e : detail::decode_bundle(s.regs[0])) member_inbox[e.receiver][e.sender] = std::move(e.payload);
    for (const auto& [peer, bundle] : inbox) {
      for (auto& e : detail::decode_bundle(bundle)) {
        auto sg = group_of_.find(e.sender);
        auto rg = group_of_.find(e.receiver);
        if (sg == group_of_.end() || rg == group_of_.end() || sg->second != peer || rg->second != self_) continue;
        member_inbox[e.receiver][e.sender] = std::move(e.payload);
      }
    }

    std::vector<detail::TaggedMessage> intra;
    std::map<PartyId, std::vector<detail::TaggedMessage>> outgoing;
    bool all_halted = true;
    for (std::size_t idx = 0; idx < mine.size(); ++idx) {
      auto& ms = s.members[idx];
      const auto& prog = *base_.programs[mine[idx]];
      if (!prog.finished(ms)) {
        auto res = prog.step(ms, round, member_inbox[mine[idx]]);
        ms = std::move(res.state);
        for (auto& [to, payload] : res.outbox) {
          auto g = group_of_.find(to);
          if (g == group_of_.end()) throw TopologyViolation("member addressed unknown party " + std::to_string(to));
          detail::TaggedMessage tm{mine[idx], to, std::move(payload)};
          if (g->second == self_) {
            intra.push_back(std::move(tm));
          } else {
            outgoing[static_cast<PartyId>(g->second)].push_back(std::move(tm));
          }
        }
      }
      if (!prog.finished(ms)) all_halted = false;
    }
    s.regs[0] = detail::encode_bundle(std::move(intra));
    for (auto& [g, entries] : outgoing) r.outbox[g] = detail::encode_bundle(std::move(entries));
    if (all_halted) s.outcome = s.members.empty() ? Outcome::bot() : *base_.programs[mine[0]]->finished(s.members[0]);
    return r;
  }

 private:
  ProtocolSpec base_;
  std::array<std::vector<PartyId>, 3> groups_;
  std::size_t self_;
  std::map<PartyId, std::size_t> group_of_;
};

inline ProtocolSpec fuse_parties(const ProtocolSpec& spec, const Partition& part) {
  std::set<PartyId> seen;
  for (std::size_t g = 0; g < 3; ++g)
    for (auto i : part.group(g)) seen.insert(i);
  if (seen.size() != spec.n() || (!seen.empty() && *seen.rbegin() >= spec.n())) {
    throw PreconditionError("partition must cover every party exactly once");
  }
  std::array<std::vector<PartyId>, 3> groups{part.b1, part.b2, part.corrupt};
  for (auto& g : groups) std::sort(g.begin(), g.end());
  ProtocolSpec fused;
  fused.name = "fused(" + spec.name + ")";
  fused.bound = spec.bound;
  fused.q = spec.q;
  std::size_t largest = 0;
  for (auto& g : groups) largest = std::max(largest, g.size());
  fused.kappa = spec.kappa * std::max<std::size_t>(largest, 1);
  for (std::size_t g = 0; g < 3; ++g) fused.programs.push_back(std::make_shared<FusedProgram>(spec, groups, g));
  return fused;
}

/// Joint input of a fused protocol from the members' inputs.
inline JointInput fuse_inputs(const ProtocolSpec& spec, const Partition& part, const JointInput& inputs) {
  JointInput w;
  const std::array<std::string, 3> labels{"B1'", "B2'", "C'"};
  for (std::size_t g = 0; g < 3; ++g) {
    auto members = part.group(g);
    std::sort(members.begin(), members.end());
    Bytes joined;
    for (auto i : members) {
      Bytes in = inputs[i].input;
      in.resize(spec.kappa, 0);
      joined.insert(joined.end(), in.begin(), in.end());
    }
    w.entries.push_back({joined, labels[g]});
  }
  return w;
}

/// n-party embedding: real honest members of group g sit inside the fused
/// slot `placement[g]`; corrupted traffic is bundled to and from the
/// simulated C' slots.
class FusedBridge : public RingBridge {
 public:
  FusedBridge(std::shared_ptr<const RingNetwork> ring, Partition part, std::map<std::size_t, NodeId> placement)
      : ring_(std::move(ring)), part_(std::move(part)), placement_(std::move(placement)) {
    for (std::size_t g = 0; g < 3; ++g)
      for (auto i : part_.group(g)) group_of_[i] = g;
    for (auto [g, slot] : placement_) by_slot_[slot] = g;
  }

  std::set<NodeId> external_slots() const override {
    std::set<NodeId> s;
    for (auto [g, slot] : placement_) s.insert(slot);
    return s;
  }

  std::vector<Message> to_slots(const std::vector<Message>& real) const override {
    std::map<std::pair<NodeId, NodeId>, std::vector<detail::TaggedMessage>> bundles;
    for (const auto& m : real) {
      auto hg = group_of_.find(m.from);
      auto cg = group_of_.find(m.to);
      if (hg == group_of_.end() || cg == group_of_.end()) continue;
      auto slot = placement_.find(hg->second);
      if (slot == placement_.end()) continue;
      const auto peers = ring_->peer_map(slot->second);
      auto target = peers.find(static_cast<PartyId>(cg->second));
      if (target == peers.end() || by_slot_.count(target->second)) continue;
      bundles[{slot->second, target->second}].push_back({m.from, m.to, m.payload});
    }
    std::vector<Message> out;
    for (auto& [edge, entries] : bundles) out.push_back({0, edge.first, edge.second, detail::encode_bundle(std::move(entries))});
    return out;
  }

  std::vector<Message> to_real(const std::vector<Message>& slots) const override {
    std::vector<Message> out;
    for (const auto& m : slots) {
      auto dest = by_slot_.find(m.to);
      if (dest == by_slot_.end()) continue;
      const auto sender_group = static_cast<std::size_t>(ring_->slot(m.from).role);
      for (auto& e : detail::decode_bundle(m.payload)) {
        auto sg = group_of_.find(e.sender);
        auto rg = group_of_.find(e.receiver);
        if (sg == group_of_.end() || rg == group_of_.end()) continue;
        if (sg->second != sender_group || rg->second != dest->second) continue;
        out.push_back({m.round, e.sender, e.receiver, std::move(e.payload)});
      }
    }
    std::sort(out.begin(), out.end(), [](const Message& a, const Message& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
    return out;
  }

 private:
  std::shared_ptr<const RingNetwork> ring_;
  Partition part_;
  std::map<std::size_t, NodeId> placement_;
  std::map<NodeId, std::size_t> by_slot_;
  std::map<PartyId, std::size_t> group_of_;
};

enum class AttackVariant { strict, expected };

struct NPartyAttack {
  std::shared_ptr<const AdversaryStrategy> adversary;  // null when phase 1 aborted
  AttackPhase1Result phase1;
  Partition partition;
  ProtocolSpec spec3;
};

/// Three-party protocol the ring is built from: the protocol itself for
/// n = 3, the fused protocol otherwise.
inline ProtocolSpec reduced_spec(const ProtocolSpec& spec, std::size_t t, const std::set<PartyId>& corrupted) {
  if (spec.n() == 3) return spec;
  return fuse_parties(spec, partition_to_three(spec.n(), t, corrupted));
}

/// Builds the output-forcing adversary for an n-party protocol corrupting
/// exactly `corrupted` (of size n-2t, or 1 without honest majority).
inline NPartyAttack attack_n_party(const ProtocolSpec& spec, std::size_t t, const std::set<PartyId>& corrupted,
                                   std::uint64_t seed, AttackVariant variant = AttackVariant::strict,
                                   std::uint32_t z = 1) {
  NPartyAttack a;
  a.partition = partition_to_three(spec.n(), t, corrupted);
  a.spec3 = reduced_spec(spec, t, corrupted);
  a.phase1 = variant == AttackVariant::strict ? phase1_strict(a.spec3, seed) : phase1_expected(a.spec3, z, seed);
  if (a.phase1.aborted) return a;
  if (spec.n() == 3) {
    auto adv = attack_adversary(a.spec3, a.phase1, corrupted);
    a.adversary = adv;
    return a;
  }
  const auto& ring = a.phase1.ring;
  RingEmbeddingAdversary::Config cfg;
  cfg.name = "ring-attack";
  cfg.corrupted = corrupted;
  cfg.ring = ring;
  cfg.bridge = std::make_shared<FusedBridge>(
      ring, a.partition, std::map<std::size_t, NodeId>{{0, ring->index(Role::A, 1)}, {1, ring->index(Role::B, 1)}});
  cfg.w = a.phase1.w;
  cfg.ring_seed = a.phase1.ring_seed;
  cfg.y_star = a.phase1.y_star;
  a.adversary = std::make_shared<RingEmbeddingAdversary>(std::move(cfg));
  return a;
}

// ---------------------------------------------------------------------------
// Monte-Carlo attack experiment

struct AttackExperimentConfig {
  std::size_t t = 1;
  std::set<PartyId> corrupted;  // defaults to the last s parties
  AttackVariant variant = AttackVariant::strict;
  std::uint32_t z = 8;
  std::size_t trials = 1000;
  std::size_t delta_trials = 1000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::optional<Round> online_cap;  // expected variant; default 64 q
};

struct AttackReport {
  std::string protocol;
  std::size_t n = 0;
  std::size_t t = 0;
  std::set<PartyId> corrupted;
  std::uint32_t m = 0;
  Round q = 0;
  std::optional<Outcome> first_y_star;
  std::map<std::string, std::size_t> y_star_histogram;
  std::map<std::string, std::size_t> honest_output_histogram;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t aborts = 0;
  std::size_t truncated = 0;
  double success_rate = 0.0;
  Interval success_ci;
  double sigma = 0.0;
  double abort_rate = 0.0;
  double abort_sigma = 0.0;
  DeltaEstimate delta;
  /// Lower bound on the success rate implied by the measured delta.
  double bound = 0.0;
  double margin = 0.0;
  bool bound_ok = false;
};

inline std::set<PartyId> default_corrupted(std::size_t n, std::size_t t) {
  std::set<PartyId> out;
  const auto s = attack_set_size(n, t);
  for (std::size_t i = n - s; i < n; ++i) out.insert(static_cast<PartyId>(i));
  return out;
}

inline AttackReport run_attack_experiment(const ProtocolSpec& spec, AttackExperimentConfig cfg) {
  if (cfg.corrupted.empty()) cfg.corrupted = default_corrupted(spec.n(), cfg.t);
  AttackReport rep;
  rep.protocol = spec.name;
  rep.n = spec.n();
  rep.t = cfg.t;
  rep.corrupted = cfg.corrupted;
  rep.q = spec.q;
  rep.trials = cfg.trials;

  const auto spec3 = reduced_spec(spec, cfg.t, cfg.corrupted);
  rep.m = cfg.variant == AttackVariant::strict ? strict_ring_copies(spec3.q) : expected_ring_copies(spec3.q);

  struct Trial {
    bool aborted = false;
    bool success = false;
    bool truncated = false;
    std::optional<Outcome> y_star;
    std::vector<Outcome> honest;
  };
  const auto cap = cfg.online_cap.value_or(64 * spec.q);
  auto trials = parallel_map(cfg.trials, cfg.jobs, [&](std::size_t i) {
    Trial tr;
    const auto trial_seed = derive_seed(cfg.seed, i);
    auto attack = attack_n_party(spec, cfg.t, cfg.corrupted, derive_seed(trial_seed, "attack"), cfg.variant, cfg.z);
    if (attack.phase1.aborted) {
      tr.aborted = true;
      return tr;
    }
    tr.y_star = attack.phase1.y_star;
    auto inputs = random_joint_input(spec, derive_seed(trial_seed, "inputs"));
    auto run = run_with_adversary(spec, *attack.adversary, inputs, derive_seed(trial_seed, "run"),
                                  cfg.variant == AttackVariant::strict ? std::optional<Round>{} : cap);
    tr.truncated = run.truncated;
    tr.success = true;
    for (auto h : run.honest()) {
      const auto& o = run.parties[h].outcome;
      if (!o) {
        tr.success = false;
        continue;
      }
      tr.honest.push_back(*o);
      if (*o != *tr.y_star) tr.success = false;
    }
    return tr;
  });

  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& tr = trials[i];
    if (tr.aborted) {
      ++rep.aborts;
      continue;
    }
    if (!rep.first_y_star) rep.first_y_star = tr.y_star;
    ++rep.y_star_histogram[tr.y_star->describe()];
    for (const auto& o : tr.honest) ++rep.honest_output_histogram[o.describe()];
    if (tr.success) ++rep.successes;
    if (tr.truncated) ++rep.truncated;
  }
  const double n = static_cast<double>(std::max<std::size_t>(cfg.trials, 1));
  rep.success_rate = static_cast<double>(rep.successes) / n;
  rep.success_ci = wilson_interval(rep.successes, cfg.trials);
  rep.sigma = binomial_sigma(rep.success_rate, cfg.trials);
  rep.abort_rate = static_cast<double>(rep.aborts) / n;
  rep.abort_sigma = binomial_sigma(rep.abort_rate, cfg.trials);

  rep.delta = estimate_ring_delta(spec3, rep.m, std::max<std::size_t>(cfg.delta_trials, 100),
                                  derive_seed(cfg.seed, "delta"), cfg.jobs);
  const double span = 1.5 * rep.m + 1.0;
  if (cfg.variant == AttackVariant::strict) {
    rep.bound = 1.0 - span * rep.delta.delta_hat - 3.0 * rep.sigma;
  } else {
    rep.bound = 1.0 - 2.0 * span * rep.delta.delta_hat - std::ldexp(1.0, -static_cast<int>(cfg.z)) - 3.0 * rep.sigma;
  }
  rep.margin = rep.success_rate - rep.bound;
  rep.bound_ok = rep.margin >= 0.0;
  return rep;
}

}  // namespace ringbreak
