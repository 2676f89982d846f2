#pragma once

// Full security for dominated functionalities from a (t1,t2)-threshold oracle.
//
// The threshold oracle computes f but lets an adversary corrupting more than
// t1 parties abort everybody to BOT. The wrapper sets t1 = n-2t-1, t2 = t and
// has every party replace BOT by y*. An abort needs |I| >= n-2t corrupted
// parties, which is exactly enough to force y* in the full ideal model, so a
// simulator can turn every abort into forcing inputs.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ringbreak/core.hpp"
#include "ringbreak/dominance.hpp"
#include "ringbreak/parallel.hpp"
#include "ringbreak/stats.hpp"

namespace ringbreak {

class IllegalAbort : public Error {
 public:
  using Error::Error;
};

class UnsupportedSubcase : public Error {
 public:
  using Error::Error;
};

class NotDominated : public Error {
 public:
  using Error::Error;
};

/// What a corrupted party submits: nothing, or a raw value that may lie
/// outside the party's domain.
using SubmittedInput = std::optional<std::int64_t>;

struct IdealDecision {
  bool abort = false;
  std::map<PartyId, SubmittedInput> inputs;

  static IdealDecision abort_all() { return {true, {}}; }
};

struct IdealResult {
  /// Per party, corrupted included.
  std::vector<Outcome> outputs;
  /// Inputs actually fed to f after default substitution; empty on abort.
  Assignment effective;
  bool aborted = false;
};

inline Outcome token_outcome(const std::string& token) { return Outcome::value(token); }

/// Full-security ideal model: missing or out-of-domain corrupted inputs are
/// replaced by defaults (all zeros unless given) and everybody gets f(x').
inline IdealResult full_ideal_exec(const FunctionTable& f, const std::map<PartyId, std::uint32_t>& honest_inputs,
                                   const std::map<PartyId, SubmittedInput>& adv_inputs,
                                   const Assignment& defaults = {}) {
  f.validate();
  IdealResult r;
  r.effective.assign(f.n, 0);
  for (PartyId i = 0; i < f.n; ++i) {
    const std::uint32_t def = defaults.empty() ? 0 : defaults.at(i);
    auto h = honest_inputs.find(i);
    auto a = adv_inputs.find(i);
    if ((h != honest_inputs.end()) == (a != adv_inputs.end())) {
      throw PreconditionError("party " + std::to_string(i + 1) + " must be exactly one of honest or corrupted");
    }
    if (h != honest_inputs.end()) {
      if (h->second >= f.domains[i]) throw PreconditionError("honest input outside the domain");
      r.effective[i] = h->second;
    } else {
      const auto& v = a->second;
      r.effective[i] = v && *v >= 0 && *v < static_cast<std::int64_t>(f.domains[i]) ? static_cast<std::uint32_t>(*v) : def;
    }
  }
  r.outputs.assign(f.n, token_outcome(f.at(r.effective)));
  return r;
}

struct ThresholdIdealConfig {
  FunctionTable f;
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  Assignment defaults;

  void validate() const {
    f.validate();
    if (t1 > t2) throw PreconditionError("threshold oracle needs t1 <= t2");
    if (t1 + 2 * t2 >= f.n) throw PreconditionError("threshold oracle needs t1 + 2*t2 < n");
  }
};

/// (t1,t2)-threshold ideal model. `decision.inputs` covers I unless aborting.
inline IdealResult threshold_ideal_exec(const ThresholdIdealConfig& cfg,
                                        const std::map<PartyId, std::uint32_t>& honest_inputs,
                                        const IdealDecision& decision, const std::set<PartyId>& I) {
  cfg.validate();
  if (I.size() > cfg.t2) throw PreconditionError("|I| exceeds t2");
  if (decision.abort) {
    if (I.size() <= cfg.t1) {
      throw IllegalAbort("abort needs |I| > t1 (|I|=" + std::to_string(I.size()) + ", t1=" + std::to_string(cfg.t1) + ")");
    }
    IdealResult r;
    r.aborted = true;
    r.outputs.assign(cfg.f.n, Outcome::bot());
    return r;
  }
  std::map<PartyId, SubmittedInput> adv;
  for (auto i : I) {
    auto it = decision.inputs.find(i);
    adv[i] = it == decision.inputs.end() ? std::nullopt : it->second;
  }
  return full_ideal_exec(cfg.f, honest_inputs, adv, cfg.defaults);
}

// ---------------------------------------------------------------------------
// The wrapper

struct WrapperParams {
  std::size_t t1 = 0;
  std::size_t t2 = 0;
};

/// t1 = n-2t-1, t2 = t for n/3 <= t < n/2 and n-2t >= 2.
inline WrapperParams wrapper_params(std::size_t n, std::size_t t) {
  if (3 * t < n || 2 * t >= n) throw PreconditionError("wrapper needs n/3 <= t < n/2");
  if (n - 2 * t == 1) throw UnsupportedSubcase("n-2t = 1 is not supported by the threshold wrapper");
  WrapperParams p{n - 2 * t - 1, t};
  if (p.t1 > p.t2 || p.t1 + 2 * p.t2 >= n) throw PreconditionError("threshold inequalities violated");
  return p;
}

struct WrappedProtocol {
  ThresholdIdealConfig oracle;
  std::size_t t = 0;
  std::string y_star;
  DominanceWitness witness;

  std::size_t n() const { return oracle.f.n; }

  /// Honest outputs of one hybrid-model execution: BOT becomes y*.
  std::map<PartyId, Outcome> run(const std::map<PartyId, std::uint32_t>& honest_inputs, const IdealDecision& decision,
                                 const std::set<PartyId>& I, Outcome* adversary_received = nullptr) const {
    auto r = threshold_ideal_exec(oracle, honest_inputs, decision, I);
    if (adversary_received) *adversary_received = r.outputs.front();
    std::map<PartyId, Outcome> out;
    for (auto& [i, x] : honest_inputs) out.emplace(i, r.outputs[i].is_bot() ? token_outcome(y_star) : r.outputs[i]);
    return out;
  }

  /// Inputs for the parties of I forcing y*, taken from the witness entry of
  /// the lexicographically first (n-2t)-subset of I.
  std::map<PartyId, std::uint32_t> forcing_inputs(const std::set<PartyId>& I) const {
    std::vector<PartyId> sub(I.begin(), I.end());
    sub.resize(witness.k);
    for (const auto& e : witness.forcings) {
      if (e.subset != sub) continue;
      std::map<PartyId, std::uint32_t> x;
      for (std::size_t j = 0; j < sub.size(); ++j) x[sub[j]] = e.assignment[j];
      return x;
    }
    throw PreconditionError("no forcing entry for the corrupted set");
  }
};

inline WrappedProtocol wrap_dominated(const FunctionTable& f, std::size_t t) {
  f.validate();
  const auto p = wrapper_params(f.n, t);
  auto w = is_k_dominated(f, f.n - 2 * t);
  if (!w) throw NotDominated("table is not " + std::to_string(f.n - 2 * t) + "-dominated");
  WrappedProtocol wp;
  wp.oracle = {f, p.t1, p.t2, Assignment(f.n, 0)};
  wp.t = t;
  wp.y_star = w->y_star();
  wp.witness = std::move(*w);
  return wp;
}

// ---------------------------------------------------------------------------
// Declarative hybrid-model adversaries

struct HybridAdversary {
  enum class Abort { never, always, coin };
  enum class Substitution { keep, constant, flip, random, out_of_domain, missing };

  std::set<PartyId> corrupted;
  Abort abort = Abort::never;
  /// Coin rule: abort iff all `abort_bits` coins are 1.
  std::uint32_t abort_bits = 1;
  Substitution substitution = Substitution::keep;
  std::uint32_t constant = 0;

  /// Sizes of the finite coin digits the adversary consumes.
  std::vector<std::uint32_t> coin_radices(const FunctionTable& f) const {
    std::vector<std::uint32_t> r;
    if (abort == Abort::coin)
      for (std::uint32_t b = 0; b < abort_bits; ++b) r.push_back(2);
    if (substitution == Substitution::random)
      for (auto i : corrupted) r.push_back(f.domains[i]);
    return r;
  }

  IdealDecision decide(const FunctionTable& f, const std::map<PartyId, std::uint32_t>& own_inputs,
                       const std::vector<std::uint32_t>& coins) const {
    std::size_t c = 0;
    IdealDecision d;
    if (abort == Abort::always) d.abort = true;
    if (abort == Abort::coin) {
      d.abort = true;
      for (std::uint32_t b = 0; b < abort_bits; ++b)
        if (coins.at(c++) == 0) d.abort = false;
    }
    for (auto i : corrupted) {
      const auto x = own_inputs.count(i) ? own_inputs.at(i) : 0u;
      switch (substitution) {
        case Substitution::keep:
          d.inputs[i] = x;
          break;
        case Substitution::constant:
          d.inputs[i] = constant;
          break;
        case Substitution::flip:
          d.inputs[i] = (x + 1) % f.domains[i];
          break;
        case Substitution::random:
          d.inputs[i] = coins.at(c++);
          break;
        case Substitution::out_of_domain:
          d.inputs[i] = static_cast<std::int64_t>(f.domains[i]);
          break;
        case Substitution::missing:
          d.inputs[i] = std::nullopt;
          break;
      }
    }
    if (d.abort) d.inputs.clear();
    return d;
  }
};

/// Joint outcome of one execution: honest outputs in party order, then what
/// the adversary outputs (its decision and the value it received).
using JointOutcome = std::pair<std::vector<Outcome>, std::string>;

namespace detail {

inline std::string adversary_output(const IdealDecision& d, const Outcome& received) {
  std::string s = d.abort ? "abort" : "inputs";
  for (auto& [i, v] : d.inputs) s += " " + std::to_string(i) + "=" + (v ? std::to_string(*v) : "none");
  return s + " got " + received.describe();
}

inline std::map<PartyId, std::uint32_t> split_honest(const Assignment& x, const std::set<PartyId>& I,
                                                     std::map<PartyId, std::uint32_t>* own) {
  std::map<PartyId, std::uint32_t> honest;
  for (PartyId i = 0; i < x.size(); ++i) {
    if (I.count(i)) {
      if (own) (*own)[i] = x[i];
    } else {
      honest[i] = x[i];
    }
  }
  return honest;
}

}  // namespace detail

/// Real execution of the wrapper against the hybrid adversary on inputs x.
inline JointOutcome real_execution(const WrappedProtocol& w, const HybridAdversary& adv, const Assignment& x,
                                   const std::vector<std::uint32_t>& coins) {
  std::map<PartyId, std::uint32_t> own;
  const auto honest = detail::split_honest(x, adv.corrupted, &own);
  const auto d = adv.decide(w.oracle.f, own, coins);
  Outcome received = Outcome::bot();
  auto out = w.run(honest, d, adv.corrupted, &received);
  JointOutcome j;
  for (auto& [i, o] : out) j.first.push_back(o);
  j.second = detail::adversary_output(d, received);
  return j;
}

/// Ideal execution with the simulator: the hybrid adversary runs against a
/// mock threshold oracle. Its abort becomes the forcing inputs for y* in the
/// full ideal model and the adversary is shown BOT; otherwise its inputs
/// are forwarded and it sees the ideal output.
inline JointOutcome ideal_execution(const WrappedProtocol& w, const HybridAdversary& adv, const Assignment& x,
                                    const std::vector<std::uint32_t>& coins) {
  if (adv.corrupted.size() > w.oracle.t2) throw PreconditionError("|I| exceeds t2");
  std::map<PartyId, std::uint32_t> own;
  const auto honest = detail::split_honest(x, adv.corrupted, &own);
  const auto d = adv.decide(w.oracle.f, own, coins);
  std::map<PartyId, SubmittedInput> submitted;
  Outcome received = Outcome::bot();
  if (d.abort) {
    if (adv.corrupted.size() <= w.oracle.t1) throw IllegalAbort("abort needs |I| > t1");
    for (auto i : adv.corrupted) submitted[i] = std::int64_t{0};
    for (auto [i, v] : w.forcing_inputs(adv.corrupted)) submitted[i] = v;
  } else {
    for (auto i : adv.corrupted) {
      auto it = d.inputs.find(i);
      submitted[i] = it == d.inputs.end() ? std::nullopt : it->second;
    }
  }
  auto r = full_ideal_exec(w.oracle.f, honest, submitted, w.oracle.defaults);
  if (!d.abort) received = r.outputs.front();
  JointOutcome j;
  for (auto& [i, xi] : honest) j.first.push_back(r.outputs[i]);
  j.second = detail::adversary_output(d, received);
  return j;
}

struct RealIdealComparison {
  double distance = 0.0;
  bool exact = false;
  std::size_t samples = 0;
  std::size_t real_support = 0;
  std::size_t ideal_support = 0;
  /// Honest BOT outputs seen on the real side.
  std::size_t real_bot = 0;
};

namespace detail {

inline double tv_distance(const std::map<JointOutcome, double>& p, const std::map<JointOutcome, double>& q) {
  double d = 0.0;
  for (auto& [k, v] : p) {
    auto it = q.find(k);
    d += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (auto& [k, v] : q)
    if (!p.count(k)) d += v;
  return d / 2.0;
}

inline std::size_t count_bot(const JointOutcome& j) {
  return static_cast<std::size_t>(std::count_if(j.first.begin(), j.first.end(), [](const Outcome& o) { return o.is_bot(); }));
}

}  // namespace detail

/// Exact statistical distance between real and ideal joint outcomes on
/// inputs x, enumerating every adversary coin vector.
inline RealIdealComparison compare_real_ideal_exact(const WrappedProtocol& w, const HybridAdversary& adv,
                                                    const Assignment& x) {
  const auto radices = adv.coin_radices(w.oracle.f);
  double total = 1.0;
  for (auto r : radices) total *= r;
  std::map<JointOutcome, double> real;
  std::map<JointOutcome, double> ideal;
  RealIdealComparison c;
  c.exact = true;
  std::vector<std::uint32_t> coins(radices.size(), 0);
  for (;;) {
    auto jr = real_execution(w, adv, x, coins);
    c.real_bot += detail::count_bot(jr);
    real[jr] += 1.0 / total;
    ideal[ideal_execution(w, adv, x, coins)] += 1.0 / total;
    ++c.samples;
    std::size_t i = coins.size();
    bool done = true;
    while (i > 0) {
      --i;
      if (++coins[i] < radices[i]) {
        done = false;
        break;
      }
      coins[i] = 0;
    }
    if (done) break;
  }
  c.distance = detail::tv_distance(real, ideal);
  c.real_support = real.size();
  c.ideal_support = ideal.size();
  return c;
}

/// Monte-Carlo estimate with independent coins on each side.
inline RealIdealComparison compare_real_ideal_sampled(const WrappedProtocol& w, const HybridAdversary& adv,
                                                      const Assignment& x, std::size_t samples, std::uint64_t seed,
                                                      unsigned jobs = 1) {
  if (samples < 1) throw PreconditionError("need at least one sample");
  const auto radices = adv.coin_radices(w.oracle.f);
  auto draw = [&](CoinStream& rng) {
    std::vector<std::uint32_t> coins;
    for (auto r : radices) coins.push_back(static_cast<std::uint32_t>(rng.next_below(r)));
    return coins;
  };
  auto pairs = parallel_map(samples, jobs, [&](std::size_t i) {
    CoinStream real_rng(derive_seed(seed, i), "real");
    CoinStream ideal_rng(derive_seed(seed, i), "ideal");
    return std::make_pair(real_execution(w, adv, x, draw(real_rng)), ideal_execution(w, adv, x, draw(ideal_rng)));
  });
  std::map<JointOutcome, double> real;
  std::map<JointOutcome, double> ideal;
  RealIdealComparison c;
  c.samples = samples;
  for (auto& [r, i] : pairs) {
    c.real_bot += detail::count_bot(r);
    real[r] += 1.0 / static_cast<double>(samples);
    ideal[i] += 1.0 / static_cast<double>(samples);
  }
  c.distance = detail::tv_distance(real, ideal);
  c.real_support = real.size();
  c.ideal_support = ideal.size();
  return c;
}

}  // namespace ringbreak
