#pragma once

// Synchronous lockstep execution over point-to-point topologies with secure
// channels. Delivery is non-rushing: a message sent in round r is consumed
// at round r+1 by honest parties and adversaries alike.

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ringbreak/core.hpp"
#include "ringbreak/parallel.hpp"
#include "ringbreak/stats.hpp"

namespace ringbreak {

using NodeId = std::uint32_t;

struct Message {
  Round round = 0;
  NodeId from = 0;
  NodeId to = 0;
  Bytes payload;

  friend bool operator==(const Message&, const Message&) = default;
  friend auto operator<=>(const Message&, const Message&) = default;
};

/// All messages of an execution ordered by (round, from, to).
using Transcript = std::vector<Message>;

inline void sort_transcript(Transcript& t) {
  std::sort(t.begin(), t.end(), [](const Message& a, const Message& b) {
    return std::tie(a.round, a.from, a.to) < std::tie(b.round, b.from, b.to);
  });
}

/// JSON lines, one record per (round, edge), fixed field order.
inline void write_transcript_jsonl(std::ostream& os, const Transcript& t) {
  for (const auto& m : t) {
    os << "{\"round\":" << m.round << ",\"from\":" << m.from << ",\"to\":" << m.to << ",\"payload\":\""
       << to_hex(m.payload) << "\"}\n";
  }
}

inline std::uint64_t transcript_hash(const Transcript& t) {
  std::ostringstream os;
  write_transcript_jsonl(os, t);
  return fnv1a64(os.str());
}

// ---------------------------------------------------------------------------
// Topology

class Topology {
 public:
  Topology() = default;
  Topology(std::size_t nodes, const std::vector<std::pair<NodeId, NodeId>>& edges) : adj_(nodes) {
    for (auto [a, b] : edges) {
      if (a == b) throw PreconditionError("topology: self-loop on node " + std::to_string(a));
      if (a >= nodes || b >= nodes) throw PreconditionError("topology: edge endpoint out of range");
      adj_[a].insert(b);
      adj_[b].insert(a);
    }
  }

  static Topology complete(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = a + 1; b < n; ++b) e.emplace_back(a, b);
    return Topology(n, e);
  }

  static Topology cycle(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (NodeId a = 0; a < n; ++a) e.emplace_back(a, static_cast<NodeId>((a + 1) % n));
    return Topology(n, e);
  }

  std::size_t size() const { return adj_.size(); }
  bool has_edge(NodeId a, NodeId b) const { return a < adj_.size() && adj_[a].count(b) > 0; }
  const std::set<NodeId>& neighbors(NodeId a) const { return adj_.at(a); }

  /// Minimal edge count between two nodes; size() when unreachable.
  std::size_t distance(NodeId a, NodeId b) const {
    std::vector<std::size_t> dist(adj_.size(), adj_.size());
    std::deque<NodeId> queue{a};
    dist[a] = 0;
    while (!queue.empty()) {
      auto u = queue.front();
      queue.pop_front();
      if (u == b) return dist[u];
      for (auto v : adj_[u]) {
        if (dist[v] == adj_.size()) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
    return adj_.size();
  }

 private:
  std::vector<std::set<NodeId>> adj_;
};

// ---------------------------------------------------------------------------
// Engine

/// Program placed on a node; `peers` maps the program's own peer ids to
/// nodes of the topology.
struct NodeBinding {
  std::shared_ptr<const PartyProgram> program;
  std::map<PartyId, NodeId> peers;
  PartyInput input;
};

/// A party's status at the end of a run. An empty outcome means RUNNING,
/// which is distinct from an outcome of BOT.
struct PartyResult {
  std::optional<Outcome> outcome;
  Round halted_at = 0;
  bool corrupted = false;

  bool running() const { return !corrupted && !outcome; }
};

struct EngineConfig {
  std::uint64_t seed = 0;
  std::size_t message_cap = 4096;
  std::optional<std::size_t> coin_budget;
};

/// Steps a set of internal nodes in lockstep. External nodes are driven by
/// the caller: their round r-1 messages are passed to advance() for round r,
/// and advance() returns the round-r messages internal nodes addressed to
/// external ones.
class LockstepEngine {
 public:
  LockstepEngine(Topology topo, std::vector<std::optional<NodeBinding>> nodes, EngineConfig cfg)
      : topo_(std::move(topo)), cfg_(cfg), nodes_(nodes.size()), pending_(nodes.size()) {
    if (nodes.size() != topo_.size()) throw PreconditionError("engine: node count differs from topology");
    for (NodeId id = 0; id < nodes.size(); ++id) {
      if (!nodes[id]) continue;
      Node node{std::move(*nodes[id]), {}, {}, 0};
      for (auto [local, global] : node.binding.peers) {
        if (!topo_.has_edge(id, global)) {
          throw TopologyViolation("node " + std::to_string(id) + " bound to non-adjacent node " +
                                  std::to_string(global));
        }
        node.reverse[global] = local;
      }
      node.state = node.binding.program->init(
          node.binding.input.input, derive_coins(cfg_.seed, node.binding.input.coin_label, cfg_.coin_budget));
      nodes_[id] = std::move(node);
    }
  }

  std::vector<Message> advance(const std::vector<Message>& external_prev) {
    for (const auto& m : external_prev) {
      if (m.from >= nodes_.size() || m.to >= nodes_.size() || nodes_[m.from]) {
        throw TopologyViolation("injected message must originate at an external node");
      }
      if (!topo_.has_edge(m.from, m.to)) {
        throw TopologyViolation("message on missing edge " + std::to_string(m.from) + "->" + std::to_string(m.to));
      }
      transcript_.push_back(m);
      deliver(m);
    }
    ++round_;
    std::vector<std::map<PartyId, Bytes>> inboxes(nodes_.size());
    std::swap(inboxes, pending_);
    pending_.assign(nodes_.size(), {});

    const std::size_t mark = transcript_.size();
    std::vector<Message> to_external;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      auto& node = nodes_[id];
      if (!node || node->halted_at != 0) continue;
      auto result = node->binding.program->step(node->state, round_, inboxes[id]);
      node->state = std::move(result.state);
      for (auto& [local, payload] : result.outbox) {
        auto it = node->binding.peers.find(local);
        if (it == node->binding.peers.end()) {
          throw TopologyViolation("node " + std::to_string(id) + " addressed unknown peer " + std::to_string(local));
        }
        if (payload.size() > cfg_.message_cap) {
          throw SpecViolation("message of " + std::to_string(payload.size()) + " bytes exceeds cap of " +
                              std::to_string(cfg_.message_cap));
        }
        Message m{round_, id, it->second, std::move(payload)};
        transcript_.push_back(m);
        if (nodes_[m.to]) {
          staged_.push_back(std::move(m));
        } else {
          to_external.push_back(std::move(m));
        }
      }
      if (node->state.outcome) node->halted_at = round_;
    }
    for (auto& m : staged_) deliver(m);
    staged_.clear();
    std::sort(transcript_.begin() + static_cast<std::ptrdiff_t>(mark), transcript_.end(),
              [](const Message& a, const Message& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
    return to_external;
  }

  Round round() const { return round_; }
  std::size_t size() const { return nodes_.size(); }
  const Topology& topology() const { return topo_; }
  bool is_external(NodeId id) const { return !nodes_.at(id); }
  bool halted(NodeId id) const { return nodes_.at(id) && nodes_[id]->halted_at != 0; }

  bool all_internal_halted() const {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const auto& n) { return !n || n->halted_at != 0; });
  }

  const PartyState& state(NodeId id) const { return nodes_.at(id).value().state; }
  const NodeBinding& binding(NodeId id) const { return nodes_.at(id).value().binding; }

  PartyResult result(NodeId id) const {
    const auto& node = nodes_.at(id);
    if (!node) return {std::nullopt, 0, true};
    return {node->state.outcome, node->halted_at, false};
  }

  /// Internal sends plus injected external messages, ordered by round.
  Transcript transcript() const {
    Transcript t = transcript_;
    sort_transcript(t);
    return t;
  }

 private:
  struct Node {
    NodeBinding binding;
    std::map<NodeId, PartyId> reverse;
    PartyState state;
    Round halted_at;
  };

  void deliver(const Message& m) {
    auto& dest = nodes_[m.to];
    if (!dest || dest->halted_at != 0) return;
    auto it = dest->reverse.find(m.from);
    if (it == dest->reverse.end()) {
      throw TopologyViolation("node " + std::to_string(m.to) + " has no peer binding for " + std::to_string(m.from));
    }
    pending_[m.to][it->second] = m.payload;
  }

  Topology topo_;
  EngineConfig cfg_;
  std::vector<std::optional<Node>> nodes_;
  std::vector<std::map<PartyId, Bytes>> pending_;
  std::vector<Message> staged_;
  Transcript transcript_;
  Round round_ = 0;
};

/// Bindings for running `spec` on the complete graph with identity peer ids.
inline std::vector<std::optional<NodeBinding>> complete_bindings(const ProtocolSpec& spec, const JointInput& inputs,
                                                                 const std::set<PartyId>& external = {}) {
  if (inputs.size() != spec.n()) throw PreconditionError("joint input length differs from party count");
  std::vector<std::optional<NodeBinding>> nodes(spec.n());
  for (PartyId i = 0; i < spec.n(); ++i) {
    if (external.count(i)) continue;
    NodeBinding b{spec.programs[i], {}, inputs[i]};
    for (auto p : spec.programs[i]->peers()) b.peers[p] = p;
    nodes[i] = std::move(b);
  }
  return nodes;
}

// ---------------------------------------------------------------------------
// Adversaries

/// One execution's worth of adversary state. Owned by a single run.
class AdversaryInstance {
 public:
  virtual ~AdversaryInstance() = default;

  /// Value announced before any interaction; queried once, before step(1).
  virtual std::optional<Bytes> pre_announce() const { return std::nullopt; }

  /// Round-r messages from corrupted parties, given the round r-1 messages
  /// honest parties addressed to corrupted parties.
  virtual std::vector<Message> step(Round round, const std::vector<Message>& inbound) = 0;

  virtual Bytes output() const { return {}; }

  /// Keeps the execution going after every honest party has halted.
  virtual bool active() const { return false; }
};

class AdversaryStrategy {
 public:
  virtual ~AdversaryStrategy() = default;
  virtual std::string name() const = 0;
  virtual std::set<PartyId> corrupted() const = 0;

  /// `inputs` is the full joint input; the adversary may read only the
  /// entries of corrupted parties.
  virtual std::unique_ptr<AdversaryInstance> start(const ProtocolSpec& spec, const JointInput& inputs,
                                                   std::uint64_t seed, const Bytes& aux) const = 0;
};

struct ExecutionResult {
  std::vector<PartyResult> parties;
  Transcript transcript;
  Round rounds = 0;
  std::optional<Bytes> pre_announced;
  Bytes adversary_output;
  /// Every message handed to the adversary, in order.
  std::vector<Message> adversary_view;
  std::set<PartyId> corrupted;
  bool truncated = false;

  std::set<PartyId> honest() const {
    std::set<PartyId> h;
    for (PartyId i = 0; i < parties.size(); ++i)
      if (!corrupted.count(i)) h.insert(i);
    return h;
  }
};

namespace detail {

inline void check_strict_bound(const ProtocolSpec& spec, const LockstepEngine& engine) {
  if (spec.bound != RoundBound::strict || engine.round() != spec.q) return;
  for (NodeId i = 0; i < engine.size(); ++i) {
    if (!engine.is_external(i) && !engine.halted(i)) {
      throw SpecViolation(spec.name + ": party " + std::to_string(i + 1) + " unfinished at round q=" +
                          std::to_string(spec.q));
    }
  }
}

}  // namespace detail

inline ExecutionResult run_honest(const ProtocolSpec& spec, const JointInput& inputs, std::uint64_t seed,
                                  std::optional<Round> max_rounds = {}) {
  const Round cap = max_rounds.value_or(spec.default_max_rounds());
  LockstepEngine engine(Topology::complete(spec.n()), complete_bindings(spec, inputs),
                        {seed, 4096, spec.coin_budget});
  while (engine.round() < cap && !engine.all_internal_halted()) {
    engine.advance({});
    detail::check_strict_bound(spec, engine);
  }
  ExecutionResult r;
  for (NodeId i = 0; i < spec.n(); ++i) r.parties.push_back(engine.result(i));
  r.transcript = engine.transcript();
  r.rounds = engine.round();
  r.truncated = !engine.all_internal_halted();
  return r;
}

inline ExecutionResult run_with_adversary(const ProtocolSpec& spec, const AdversaryStrategy& adv,
                                          const JointInput& inputs, std::uint64_t seed,
                                          std::optional<Round> max_rounds = {}, const Bytes& aux = {}) {
  const auto corrupted = adv.corrupted();
  for (auto c : corrupted) {
    if (c >= spec.n()) throw PreconditionError("corrupted index out of range");
  }
  const Round cap = max_rounds.value_or(spec.default_max_rounds());
  const auto topo = Topology::complete(spec.n());
  LockstepEngine engine(topo, complete_bindings(spec, inputs, corrupted), {seed, 4096, spec.coin_budget});

  ExecutionResult r;
  r.corrupted = corrupted;
  auto instance = adv.start(spec, inputs, seed, aux);
  r.pre_announced = instance->pre_announce();

  std::vector<Message> adv_prev;
  std::vector<Message> inbound_prev;
  while (engine.round() < cap && (!engine.all_internal_halted() || instance->active())) {
    auto honest_out = engine.advance(adv_prev);
    detail::check_strict_bound(spec, engine);
    const Round round = engine.round();
    r.adversary_view.insert(r.adversary_view.end(), inbound_prev.begin(), inbound_prev.end());
    auto adv_out = instance->step(round, inbound_prev);
    for (auto& m : adv_out) {
      if (!corrupted.count(m.from)) {
        throw TopologyViolation("adversary sent on behalf of honest party " + std::to_string(m.from));
      }
      if (!topo.has_edge(m.from, m.to)) {
        throw TopologyViolation("adversary message on missing edge");
      }
      m.round = round;
    }
    adv_prev = std::move(adv_out);
    inbound_prev = std::move(honest_out);
  }
  for (NodeId i = 0; i < spec.n(); ++i) r.parties.push_back(engine.result(i));
  r.transcript = engine.transcript();
  // Corrupted traffic of the final round was never delivered; keep it.
  r.transcript.insert(r.transcript.end(), adv_prev.begin(), adv_prev.end());
  sort_transcript(r.transcript);
  r.rounds = engine.round();
  r.truncated = !engine.all_internal_halted();
  r.adversary_output = instance->output();
  return r;
}

/// True iff all honest parties produced equal outcomes (BOT included).
inline bool check_consistency(const ExecutionResult& result, const std::set<PartyId>& honest) {
  const Outcome* first = nullptr;
  bool same = true;
  for (auto i : honest) {
    const auto& p = result.parties.at(i);
    if (!p.outcome) throw PreconditionError("party " + std::to_string(i + 1) + " is still RUNNING");
    if (!first) {
      first = &*p.outcome;
    } else if (*p.outcome != *first) {
      same = false;
    }
  }
  return same;
}

inline bool check_consistency(const ExecutionResult& result) { return check_consistency(result, result.honest()); }

// ---------------------------------------------------------------------------
// Stock adversaries

/// Runs the honest programs of the corrupted parties; indistinguishable from
/// an honest execution.
class PassiveAdversary : public AdversaryStrategy {
 public:
  explicit PassiveAdversary(std::set<PartyId> corrupted) : corrupted_(std::move(corrupted)) {}

  std::string name() const override { return "passive"; }
  std::set<PartyId> corrupted() const override { return corrupted_; }

  std::unique_ptr<AdversaryInstance> start(const ProtocolSpec& spec, const JointInput& inputs, std::uint64_t seed,
                                           const Bytes&) const override {
    std::set<PartyId> honest;
    for (PartyId i = 0; i < spec.n(); ++i)
      if (!corrupted_.count(i)) honest.insert(i);
    return std::make_unique<Instance>(LockstepEngine(Topology::complete(spec.n()),
                                                     complete_bindings(spec, inputs, honest),
                                                     {seed, 4096, spec.coin_budget}));
  }

 private:
  class Instance : public AdversaryInstance {
   public:
    explicit Instance(LockstepEngine engine) : engine_(std::move(engine)) {}
    std::vector<Message> step(Round, const std::vector<Message>& inbound) override { return engine_.advance(inbound); }
    bool active() const override { return !engine_.all_internal_halted(); }

   private:
    LockstepEngine engine_;
  };

  std::set<PartyId> corrupted_;
};

/// Sends nothing at all.
class SilentAdversary : public AdversaryStrategy {
 public:
  explicit SilentAdversary(std::set<PartyId> corrupted) : corrupted_(std::move(corrupted)) {}

  std::string name() const override { return "silent"; }
  std::set<PartyId> corrupted() const override { return corrupted_; }

  std::unique_ptr<AdversaryInstance> start(const ProtocolSpec&, const JointInput&, std::uint64_t,
                                           const Bytes&) const override {
    struct Instance : AdversaryInstance {
      std::vector<Message> step(Round, const std::vector<Message>&) override { return {}; }
    };
    return std::make_unique<Instance>();
  }

 private:
  std::set<PartyId> corrupted_;
};

/// Split-brain equivocation: the honest parties are split into two halves
/// and each half talks to its own copy of the corrupted parties. Copy 0 runs
/// on the first domain value, copy 1 on the second (or the bitwise
/// complement of the first when the domain is open).
class EquivocatingAdversary : public AdversaryStrategy {
 public:
  explicit EquivocatingAdversary(std::set<PartyId> corrupted) : corrupted_(std::move(corrupted)) {}

  std::string name() const override { return "equivocator"; }
  std::set<PartyId> corrupted() const override { return corrupted_; }

  std::unique_ptr<AdversaryInstance> start(const ProtocolSpec& spec, const JointInput& inputs, std::uint64_t seed,
                                           const Bytes&) const override {
    std::vector<PartyId> honest;
    for (PartyId i = 0; i < spec.n(); ++i)
      if (!corrupted_.count(i)) honest.push_back(i);
    const std::size_t half = (honest.size() + 1) / 2;
    std::array<std::set<PartyId>, 2> sides;
    for (std::size_t k = 0; k < honest.size(); ++k) sides[k < half ? 0 : 1].insert(honest[k]);

    Bytes v0 = spec.input_domain.empty() ? Bytes(spec.kappa, 0) : spec.input_domain.front();
    Bytes v1 = v0;
    if (spec.input_domain.size() >= 2) {
      v1 = spec.input_domain[1];
    } else {
      for (auto& b : v1) b = static_cast<std::uint8_t>(~b);
    }
    std::vector<LockstepEngine> copies;
    std::set<PartyId> all_honest(honest.begin(), honest.end());
    for (int k = 0; k < 2; ++k) {
      JointInput w = inputs;
      for (auto c : corrupted_) w[c].input = k == 0 ? v0 : v1;
      copies.emplace_back(Topology::complete(spec.n()), complete_bindings(spec, w, all_honest),
                          EngineConfig{seed, 4096, spec.coin_budget});
    }
    return std::make_unique<Instance>(std::move(copies), sides);
  }

 private:
  class Instance : public AdversaryInstance {
   public:
    Instance(std::vector<LockstepEngine> copies, std::array<std::set<PartyId>, 2> sides)
        : copies_(std::move(copies)), sides_(std::move(sides)) {}

    std::vector<Message> step(Round, const std::vector<Message>& inbound) override {
      std::vector<Message> out;
      for (int k = 0; k < 2; ++k) {
        std::vector<Message> mine;
        for (const auto& m : inbound)
          if (sides_[k].count(m.from)) mine.push_back(m);
        for (auto& m : copies_[k].advance(mine))
          if (sides_[k].count(m.to)) out.push_back(std::move(m));
      }
      return out;
    }

   private:
    std::vector<LockstepEngine> copies_;
    std::array<std::set<PartyId>, 2> sides_;
  };

  std::set<PartyId> corrupted_;
};

// ---------------------------------------------------------------------------
// Consistency estimation

struct ConsistencyEstimate {
  std::string adversary;
  std::size_t trials = 0;
  std::size_t inconsistent = 0;
  double delta_hat = 0.0;
  Interval ci;
};

/// Inconsistency rate per adversary over `trials` executions with uniformly
/// sampled honest inputs and per-trial seeds.
inline std::vector<ConsistencyEstimate> estimate_consistency(
    const ProtocolSpec& spec, const std::vector<std::shared_ptr<const AdversaryStrategy>>& family, std::size_t trials,
    std::uint64_t seed, unsigned jobs = 1, std::optional<Round> max_rounds = {}) {
  if (trials < 100) throw PreconditionError("estimate_consistency needs at least 100 trials");
  std::vector<ConsistencyEstimate> out;
  for (std::size_t a = 0; a < family.size(); ++a) {
    const auto& adv = *family[a];
    const auto adv_seed = derive_seed(seed, a);
    auto flags = parallel_map(trials, jobs, [&](std::size_t i) {
      const auto trial_seed = derive_seed(adv_seed, i);
      auto inputs = random_joint_input(spec, derive_seed(trial_seed, "inputs"));
      auto r = run_with_adversary(spec, adv, inputs, trial_seed, max_rounds);
      return check_consistency(r) ? 0 : 1;
    });
    ConsistencyEstimate e;
    e.adversary = adv.name();
    e.trials = trials;
    for (auto f : flags) e.inconsistent += static_cast<std::size_t>(f);
    e.delta_hat = static_cast<double>(e.inconsistent) / static_cast<double>(trials);
    e.ci = wilson_interval(e.inconsistent, trials);
    out.push_back(e);
  }
  return out;
}

}  // namespace ringbreak
