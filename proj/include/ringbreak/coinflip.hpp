#pragma once

// Bias of coin-flipping protocols and the forcing attack against them.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ringbreak/core.hpp"
#include "ringbreak/netsim.hpp"
#include "ringbreak/parallel.hpp"
#include "ringbreak/ring.hpp"
#include "ringbreak/stats.hpp"

namespace ringbreak {

struct BiasReport {
  std::string adversary;
  std::size_t trials = 0;
  std::size_t consistent = 0;
  std::size_t inconsistent = 0;
  /// Runs in which an honest party never halted.
  std::size_t running = 0;
  std::size_t aborts = 0;
  std::size_t zeros = 0;
  std::size_t ones = 0;
  std::size_t other = 0;
  double p0 = 0.0;
  double p1 = 0.0;
  double p_other = 0.0;
  /// Statistical distance of the common honest output from a uniform bit;
  /// "other" (BOT and non-bit values) counts fully against uniformity.
  double distance = 0.0;
  Interval ci;
  std::optional<Outcome> y_star;
};

/// Produces the adversary for one trial; null means an honest run.
using AdversaryFactory = std::function<std::shared_ptr<const AdversaryStrategy>(std::uint64_t seed)>;

inline double distance_from_uniform_bit(double p0, double p1, double p_other) {
  return 0.5 * (std::abs(p0 - 0.5) + std::abs(p1 - 0.5) + p_other);
}

inline BiasReport measure_bias(const ProtocolSpec& spec, const AdversaryFactory& adversary, std::size_t trials,
                               std::uint64_t seed, unsigned jobs = 1) {
  if (trials < 1000) throw PreconditionError("measure_bias needs at least 1000 trials");
  enum Kind { zero, one, other, inconsistent, running };
  auto kinds = parallel_map(trials, jobs, [&](std::size_t i) {
    const auto trial_seed = derive_seed(seed, i);
    const auto inputs = random_joint_input(spec, derive_seed(trial_seed, "inputs"));
    std::shared_ptr<const AdversaryStrategy> adv = adversary ? adversary(derive_seed(trial_seed, "adversary")) : nullptr;
    auto r = adv ? run_with_adversary(spec, *adv, inputs, derive_seed(trial_seed, "run"))
                 : run_honest(spec, inputs, derive_seed(trial_seed, "run"));
    const auto honest = r.honest();
    for (auto h : honest)
      if (!r.parties[h].outcome) return running;
    if (!check_consistency(r, honest)) return inconsistent;
    const auto& o = *r.parties[*honest.begin()].outcome;
    if (!o.is_bot() && o.bytes() == Bytes{0}) return zero;
    if (!o.is_bot() && o.bytes() == Bytes{1}) return one;
    return other;
  });
  BiasReport b;
  b.trials = trials;
  for (auto k : kinds) {
    switch (k) {
      case zero:
        ++b.zeros;
        break;
      case one:
        ++b.ones;
        break;
      case other:
        ++b.other;
        break;
      case inconsistent:
        ++b.inconsistent;
        break;
      case running:
        ++b.running;
        break;
    }
  }
  b.consistent = b.zeros + b.ones + b.other;
  if (b.consistent > 0) {
    const double c = static_cast<double>(b.consistent);
    b.p0 = static_cast<double>(b.zeros) / c;
    b.p1 = static_cast<double>(b.ones) / c;
    b.p_other = static_cast<double>(b.other) / c;
    b.distance = distance_from_uniform_bit(b.p0, b.p1, b.p_other);
    // Normal interval on the dominant bucket carried over to the distance.
    const double p = std::max({b.p0, b.p1, b.p_other});
    const double half = 1.96 * binomial_sigma(p, b.consistent);
    b.ci = {std::max(0.0, b.distance - half), std::min(1.0, b.distance + half)};
  }
  return b;
}

// ---------------------------------------------------------------------------
// Bias attack

struct BiasAttack {
  /// Forcing adversary, or a silent one after ABORT.
  std::shared_ptr<const AdversaryStrategy> adversary;
  bool aborted = false;
  std::uint32_t attempts = 0;
  std::optional<Outcome> y_star;
  std::uint32_t m = 0;
};

/// Corruption threshold the attack targets: t = ceil(n/3).
inline std::size_t coinflip_threshold(std::size_t n) { return (n + 2) / 3; }

/// Repeats phase 1 with fresh seeds until P* outputs something other than
/// `excluded`, for at most kappa attempts. |I| must be ceil(n/3); when the
/// ring attack needs fewer parties, the smallest members of I attack and the
/// rest behave honestly.
inline BiasAttack bias_attack(const ProtocolSpec& spec, const std::set<PartyId>& I, std::uint32_t kappa,
                              std::uint64_t seed, const Outcome& excluded = Outcome::byte(0)) {
  const auto n = spec.n();
  const auto t = coinflip_threshold(n);
  if (I.size() != t) throw PreconditionError("bias attack corrupts exactly ceil(n/3) parties");
  if (kappa < 1) throw PreconditionError("bias attack needs kappa >= 1");
  std::set<PartyId> active;
  for (auto i : I) {
    if (active.size() == attack_set_size(n, t)) break;
    active.insert(i);
  }
  const auto variant = spec.bound == RoundBound::strict ? AttackVariant::strict : AttackVariant::expected;
  BiasAttack b;
  for (std::uint32_t a = 1; a <= kappa; ++a) {
    auto attack = attack_n_party(spec, t, active, derive_seed(seed, "attempt/" + std::to_string(a)), variant, kappa);
    b.attempts = a;
    b.m = attack.phase1.m();
    if (attack.phase1.aborted || *attack.phase1.y_star == excluded) continue;
    b.adversary = attack.adversary;
    b.y_star = attack.phase1.y_star;
    return b;
  }
  b.aborted = true;
  b.adversary = std::make_shared<SilentAdversary>(active);
  return b;
}

struct NoBiasVerdict {
  Outcome excluded = Outcome::byte(0);
  std::uint32_t kappa = 0;
  std::uint32_t m = 0;
  BiasReport forced;
  DeltaEstimate delta;
  std::size_t aborts = 0;
  double abort_rate = 0.0;
  double abort_bound = 0.0;
  /// Frequency of the most common forced value among consistent runs.
  double forced_rate = 0.0;
  double sigma = 0.0;
  double bound = 0.0;
  bool bound_ok = false;
  bool abort_ok = false;
  /// The distance bound is vacuous (<= 0) at the measured delta.
  bool inconclusive = false;

  bool ok() const { return bound_ok && abort_ok; }
};

/// Picks the value phase 1 produces less often as the one to exclude.
inline Outcome minority_value(const ProtocolSpec& spec, std::size_t pilot, std::uint64_t seed) {
  const auto t = coinflip_threshold(spec.n());
  const auto s = attack_set_size(spec.n(), t);
  std::set<PartyId> I;
  for (std::size_t i = spec.n() - s; i < spec.n(); ++i) I.insert(static_cast<PartyId>(i));
  const auto spec3 = reduced_spec(spec, t, I);
  std::size_t zeros = 0;
  std::size_t ones = 0;
  for (std::size_t k = 0; k < pilot; ++k) {
    const auto ps = derive_seed(seed, k);
    auto p1 = spec3.bound == RoundBound::strict ? phase1_strict(spec3, ps) : phase1_expected(spec3, 8, ps);
    if (!p1.y_star) continue;
    if (*p1.y_star == Outcome::byte(0)) ++zeros;
    if (*p1.y_star == Outcome::byte(1)) ++ones;
  }
  return ones < zeros ? Outcome::byte(1) : Outcome::byte(0);
}

/// Forces every trial with a fresh bias attack and checks the forced
/// distance against 1/2 - 2^-kappa - (3m/2+1) delta - 3 sigma and the abort
/// rate against 2^-kappa + 3 sigma.
inline NoBiasVerdict verify_no_nontrivial_bias(const ProtocolSpec& spec, std::uint32_t kappa, std::size_t trials,
                                               std::uint64_t seed, unsigned jobs = 1, std::size_t delta_trials = 1000,
                                               std::size_t pilot = 200) {
  NoBiasVerdict v;
  v.kappa = kappa;
  v.excluded = minority_value(spec, pilot, derive_seed(seed, "pilot"));
  const auto n = spec.n();
  const auto t = coinflip_threshold(n);
  std::set<PartyId> I;
  for (std::size_t i = n - t; i < n; ++i) I.insert(static_cast<PartyId>(i));

  auto aborted = parallel_map(trials, jobs, [&](std::size_t i) {
    return bias_attack(spec, I, kappa, derive_seed(derive_seed(seed, i), "adversary"), v.excluded).aborted ? 1 : 0;
  });
  for (auto a : aborted) v.aborts += static_cast<std::size_t>(a);

  v.forced = measure_bias(
      spec,
      [&](std::uint64_t s) -> std::shared_ptr<const AdversaryStrategy> {
        return bias_attack(spec, I, kappa, s, v.excluded).adversary;
      },
      trials, seed, jobs);
  v.forced.adversary = "bias-attack";

  std::set<PartyId> active;
  for (auto i : I) {
    if (active.size() == attack_set_size(n, t)) break;
    active.insert(i);
  }
  const auto spec3 = reduced_spec(spec, t, active);
  v.m = spec3.bound == RoundBound::strict ? strict_ring_copies(spec3.q) : expected_ring_copies(spec3.q);
  v.delta = estimate_ring_delta(spec3, v.m, std::max<std::size_t>(delta_trials, 100), derive_seed(seed, "delta"), jobs);

  const double eps = std::ldexp(1.0, -static_cast<int>(kappa));
  v.abort_rate = static_cast<double>(v.aborts) / static_cast<double>(trials);
  v.abort_bound = eps + 3.0 * binomial_sigma(eps, trials);
  v.abort_ok = v.abort_rate <= v.abort_bound;

  v.forced_rate = std::max(v.forced.p0, v.forced.p1);
  v.sigma = binomial_sigma(v.forced_rate, std::max<std::size_t>(v.forced.consistent, 1));
  v.bound = 0.5 - eps - (1.5 * v.m + 1.0) * v.delta.delta_hat - 3.0 * v.sigma;
  v.bound_ok = v.forced.distance >= v.bound;
  v.inconclusive = v.bound <= 0.0;
  return v;
}

}  // namespace ringbreak
