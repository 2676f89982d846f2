#pragma once

#include <set>
#include <string>
#include <vector>

#include "ringbreak/netsim.hpp"

namespace ringbreak {

struct ValidationReport {
  std::size_t trials = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Runs `spec` honestly `trials` times on random inputs and coins and
/// collects contract violations: strict round overruns, activity after
/// halting, impure steps and replay divergence.
inline ValidationReport validate_spec(const ProtocolSpec& spec, std::size_t trials, std::uint64_t seed,
                                      std::size_t probes_per_halt = 3) {
  if (trials < 1) throw PreconditionError("validate_spec needs at least one trial");
  std::set<std::string> found;
  const Round cap = spec.default_max_rounds();
  for (std::size_t t = 0; t < trials; ++t) {
    const auto trial_seed = derive_seed(seed, t);
    const auto inputs = random_joint_input(spec, derive_seed(trial_seed, "inputs"));
    CoinStream probe_rng(trial_seed, "probe");

    LockstepEngine engine(Topology::complete(spec.n()), complete_bindings(spec, inputs),
                          {trial_seed, 4096, spec.coin_budget});
    std::vector<bool> probed(spec.n(), false);
    try {
      while (engine.round() < cap && !engine.all_internal_halted()) {
        // Purity: stepping twice on identical arguments agrees.
        for (PartyId i = 0; i < spec.n(); ++i) {
          if (engine.halted(i)) continue;
          const auto& prog = *spec.programs[i];
          Inbox inbox;
          auto a = prog.step(engine.state(i), engine.round() + 1, inbox);
          auto b = prog.step(engine.state(i), engine.round() + 1, inbox);
          if (!(a.state == b.state) || a.outbox != b.outbox) found.insert("impure step (party " + std::to_string(i + 1) + ")");
        }
        engine.advance({});
        for (PartyId i = 0; i < spec.n(); ++i) {
          if (!engine.halted(i) || probed[i]) continue;
          probed[i] = true;
          const auto& prog = *spec.programs[i];
          const auto& halted_state = engine.state(i);
          for (std::size_t k = 0; k < probes_per_halt; ++k) {
            Inbox inbox;
            for (auto p : prog.peers()) inbox[p] = probe_rng.take(1 + probe_rng.next_below(4));
            auto r = prog.step(halted_state, engine.round() + 1 + static_cast<Round>(k), inbox);
            if (!r.outbox.empty()) found.insert("active after halt (party " + std::to_string(i + 1) + ")");
            if (prog.finished(r.state) != prog.finished(halted_state)) {
              found.insert("outcome changed after halt (party " + std::to_string(i + 1) + ")");
            }
          }
        }
        if (spec.bound == RoundBound::strict && engine.round() == spec.q && !engine.all_internal_halted()) {
          found.insert("strict round bound q=" + std::to_string(spec.q) + " exceeded");
          break;
        }
      }
    } catch (const Error& e) {
      found.insert(std::string("execution error: ") + e.what());
      continue;
    }

    try {
      auto first = run_honest(spec, inputs, trial_seed, cap);
      auto second = run_honest(spec, inputs, trial_seed, cap);
      if (first.transcript != second.transcript || transcript_hash(first.transcript) != transcript_hash(second.transcript)) {
        found.insert("nondeterministic transcript");
      }
      for (PartyId i = 0; i < spec.n(); ++i) {
        if (first.parties[i].outcome != second.parties[i].outcome) found.insert("nondeterministic outcome");
      }
    } catch (const Error&) {
      // Already reported by the instrumented run.
    }
  }
  return {trials, {found.begin(), found.end()}};
}

}  // namespace ringbreak
