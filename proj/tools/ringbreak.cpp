// ringbreak: experiment runner.
//
//   ringbreak attack      --protocol echo_xor:2 --n 3 --t 1 --trials 1000
//   ringbreak dominance   --table tables/or3.json --t 1
//   ringbreak coinflip    --protocol fair_coin --mode attack --kappa 10
//   ringbreak compile     --table tables/th3of9.json --t 3 --abort always
//   ringbreak consistency --protocol echo_xor:2 --adversary embedding
//   ringbreak validate    --protocol geom_halt:0.2
//
// Every report embeds the effective configuration; `--config report.json`
// re-runs it. Flags given on the command line override the file.
//
// Exit codes: 0 success, 1 failed bound or check, 2 input error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ringbreak/coinflip.hpp"
#include "ringbreak/compiler.hpp"
#include "ringbreak/dominance.hpp"
#include "ringbreak/netsim.hpp"
#include "ringbreak/ring.hpp"
#include "ringbreak/table_io.hpp"
#include "ringbreak/validate.hpp"
#include "ringbreak/zoo.hpp"

using json = nlohmann::ordered_json;
using namespace ringbreak;

namespace {

constexpr int kSchemaVersion = 1;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options that only affect where output goes or how fast it is produced.
const std::set<std::string> kNotConfig = {"help", "config", "out", "csv", "transcript", "jobs"};

struct Common {
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::string out;
  std::string csv;
  std::string config;
};

std::set<PartyId> parse_parties(const std::string& s, std::size_t n) {
  std::set<PartyId> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      throw InputError("bad party index '" + item + "'");
    }
    if (pos != item.size() || v < 1 || v > n) throw InputError("party index '" + item + "' outside 1.." + std::to_string(n));
    out.insert(static_cast<PartyId>(v - 1));
  }
  return out;
}

json parties_json(const std::set<PartyId>& s) {
  json a = json::array();
  for (auto i : s) a.push_back(i + 1);
  return a;
}

json outcome_json(const std::optional<Outcome>& o) { return o ? json(o->describe()) : json(nullptr); }

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json delta_json(const DeltaEstimate& d) {
  json per = json::array();
  for (const auto& e : d.per_pair) {
    per.push_back({{"adversary", e.adversary}, {"inconsistent", e.inconsistent}, {"delta_hat", e.delta_hat},
                   {"ci", interval_json(e.ci)}});
  }
  return {{"trials", d.trials}, {"delta_hat", d.delta_hat}, {"ci", interval_json(d.ci)}, {"per_pair", per}};
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Subcommands

json run_attack(CLI::App& cmd, const Common& c, const std::string& transcript_path, int& status) {
  const auto selector = cmd.get_option("--protocol")->as<std::string>();
  const auto n = cmd.get_option("--n")->as<std::size_t>();
  const auto t = cmd.get_option("--t")->as<std::size_t>();
  const auto variant_name = cmd.get_option("--variant")->as<std::string>();
  const auto spec = zoo::make_protocol(selector, n);

  AttackExperimentConfig cfg;
  cfg.t = t;
  cfg.variant = variant_name == "expected" ? AttackVariant::expected : AttackVariant::strict;
  if (cfg.variant == AttackVariant::strict && spec.bound != RoundBound::strict) {
    throw InputError(selector + " has an expected round bound; use --variant expected");
  }
  cfg.z = cmd.get_option("--z")->as<std::uint32_t>();
  cfg.trials = cmd.get_option("--trials")->as<std::size_t>();
  cfg.delta_trials = cmd.get_option("--delta-trials")->as<std::size_t>();
  cfg.seed = c.seed;
  cfg.jobs = c.jobs;
  const auto corrupt = cmd.get_option("--corrupt")->as<std::string>();
  if (!corrupt.empty()) cfg.corrupted = parse_parties(corrupt, n);
  const auto cap = cmd.get_option("--online-cap")->as<Round>();
  if (cap > 0) cfg.online_cap = cap;

  auto rep = run_attack_experiment(spec, cfg);

  if (!transcript_path.empty() && rep.trials > 0) {
    const auto trial_seed = derive_seed(cfg.seed, std::uint64_t{0});
    auto attack = attack_n_party(spec, t, rep.corrupted, derive_seed(trial_seed, "attack"), cfg.variant, cfg.z);
    std::ostringstream os;
    if (attack.adversary) {
      auto inputs = random_joint_input(spec, derive_seed(trial_seed, "inputs"));
      auto run = run_with_adversary(spec, *attack.adversary, inputs, derive_seed(trial_seed, "run"),
                                    cfg.variant == AttackVariant::strict ? std::optional<Round>{}
                                                                         : cfg.online_cap.value_or(64 * spec.q));
      write_transcript_jsonl(os, run.transcript);
    }
    write_text(transcript_path, os.str());
  }

  json hist = json::object();
  for (auto& [k, v] : rep.y_star_histogram) hist[k] = v;
  json outs = json::object();
  for (auto& [k, v] : rep.honest_output_histogram) outs[k] = v;
  json r;
  r["protocol"] = rep.protocol;
  r["n"] = rep.n;
  r["t"] = rep.t;
  r["corrupted"] = parties_json(rep.corrupted);
  r["variant"] = variant_name;
  r["m"] = rep.m;
  r["q"] = rep.q;
  r["y_star"] = outcome_json(rep.first_y_star);
  r["y_star_histogram"] = hist;
  r["honest_output_histogram"] = outs;
  r["trials"] = rep.trials;
  r["successes"] = rep.successes;
  r["success_rate"] = rep.success_rate;
  r["success_ci"] = interval_json(rep.success_ci);
  r["sigma"] = rep.sigma;
  r["aborts"] = rep.aborts;
  r["abort_rate"] = rep.abort_rate;
  r["truncated"] = rep.truncated;
  r["delta"] = delta_json(rep.delta);
  r["bound"] = rep.bound;
  r["margin"] = rep.margin;
  if (cfg.variant == AttackVariant::expected) {
    const double e = std::ldexp(1.0, -static_cast<int>(cfg.z));
    const double abort_bound = e + 3.0 * binomial_sigma(e, rep.trials);
    r["abort_bound"] = abort_bound;
    r["abort_ok"] = rep.abort_rate <= abort_bound;
    if (rep.abort_rate > abort_bound) status = 1;
  }
  r["bound_ok"] = rep.bound_ok;
  if (!rep.bound_ok) status = 1;
  if (!c.csv.empty()) {
    std::string csv = "honest_output,count\n";
    for (auto& [k, v] : rep.honest_output_histogram) csv += k + "," + std::to_string(v) + "\n";
    write_text(c.csv, csv);
  }
  return r;
}

json run_dominance(CLI::App& cmd, const Common& c) {
  const auto f = load_table(cmd.get_option("--table")->as<std::string>());
  const auto budget = cmd.get_option("--budget")->as<std::size_t>();
  const auto k = cmd.get_option("--k")->as<std::size_t>();
  const auto t = cmd.get_option("--t")->as<std::size_t>();
  json r;
  r["n"] = f.n;
  r["domains"] = f.domains;
  r["entries"] = f.size();
  auto p = dominance_profile(f, budget);
  json rows = json::array();
  for (const auto& row : p.rows) {
    rows.push_back({{"k", row.k}, {"weak", row.weak}, {"strong", row.strong},
                    {"y_star", row.y_star ? json(*row.y_star) : json(nullptr)}});
  }
  r["profile"] = rows;
  r["minimal_strong_k"] = p.minimal_strong_k ? json(*p.minimal_strong_k) : json(nullptr);
  r["monotone"] = p.monotone;
  if (k > 0) {
    auto witness_json = [](const std::optional<DominanceWitness>& w) -> json {
      if (!w) return nullptr;
      json fs = json::array();
      for (const auto& e : w->forcings) {
        json sub = json::array();
        for (auto i : e.subset) sub.push_back(i + 1);
        fs.push_back({{"parties", sub}, {"assignment", e.assignment}, {"value", e.value}});
      }
      json j{{"k", w->k}, {"strong", w->strong}, {"forcings", fs}};
      if (w->strong) {
        j["y_star"] = w->y_star();
        j["qualifying"] = w->qualifying;
      }
      return j;
    };
    r["weak"] = witness_json(is_weakly_k_dominated(f, k));
    r["strong"] = witness_json(is_k_dominated(f, k));
  }
  if (t > 0) {
    auto v = classify(f, t);
    r["classification"] = {{"t", v.t},
                           {"k", v.k},
                           {"verdict", to_string(v.verdict)},
                           {"y_star", v.y_star ? json(*v.y_star) : json(nullptr)},
                           {"reason", v.reason}};
  }
  if (!c.csv.empty()) write_text(c.csv, profile_csv(p));
  return r;
}

json bias_json(const BiasReport& b) {
  return {{"adversary", b.adversary},
          {"trials", b.trials},
          {"consistent", b.consistent},
          {"inconsistent", b.inconsistent},
          {"running", b.running},
          {"counts", {{"0", b.zeros}, {"1", b.ones}, {"other", b.other}}},
          {"distribution", {{"0", b.p0}, {"1", b.p1}, {"other", b.p_other}}},
          {"distance", b.distance},
          {"ci", interval_json(b.ci)}};
}

json run_coinflip(CLI::App& cmd, const Common& c, int& status) {
  const auto selector = cmd.get_option("--protocol")->as<std::string>();
  const auto n = cmd.get_option("--n")->as<std::size_t>();
  const auto mode = cmd.get_option("--mode")->as<std::string>();
  const auto kappa = cmd.get_option("--kappa")->as<std::uint32_t>();
  const auto trials = cmd.get_option("--trials")->as<std::size_t>();
  const auto exclude = cmd.get_option("--exclude")->as<std::string>();
  const auto spec = zoo::make_protocol(selector, n);
  json r;
  r["protocol"] = spec.name;
  r["n"] = n;
  r["mode"] = mode;
  BiasReport hist_source;
  if (mode == "honest") {
    auto b = measure_bias(spec, nullptr, trials, c.seed, c.jobs);
    b.adversary = "none";
    r["bias"] = bias_json(b);
    hist_source = b;
  } else {
    const auto t = coinflip_threshold(n);
    std::set<PartyId> I;
    for (std::size_t i = n - t; i < n; ++i) I.insert(static_cast<PartyId>(i));
    NoBiasVerdict v;
    if (exclude == "auto") {
      v = verify_no_nontrivial_bias(spec, kappa, trials, c.seed, c.jobs,
                                    cmd.get_option("--delta-trials")->as<std::size_t>());
    } else {
      // A fixed excluded value: measure the forced distribution and aborts.
      const auto ex = Outcome::byte(static_cast<std::uint8_t>(std::stoul(exclude)));
      v.kappa = kappa;
      v.excluded = ex;
      auto b = measure_bias(
          spec, [&](std::uint64_t s) -> std::shared_ptr<const AdversaryStrategy> { return bias_attack(spec, I, kappa, s, ex).adversary; },
          trials, c.seed, c.jobs);
      b.adversary = "bias-attack";
      for (std::size_t i = 0; i < trials; ++i)
        if (bias_attack(spec, I, kappa, derive_seed(derive_seed(c.seed, i), "adversary"), ex).aborted) ++v.aborts;
      v.forced = b;
      v.abort_rate = static_cast<double>(v.aborts) / static_cast<double>(trials);
      const double e = std::ldexp(1.0, -static_cast<int>(kappa));
      v.abort_bound = e + 3.0 * binomial_sigma(e, trials);
      v.abort_ok = v.abort_rate <= v.abort_bound;
      v.bound_ok = true;
    }
    r["corrupted"] = parties_json(I);
    r["kappa"] = kappa;
    r["excluded"] = v.excluded.describe();
    r["bias"] = bias_json(v.forced);
    r["aborts"] = v.aborts;
    r["abort_rate"] = v.abort_rate;
    r["abort_bound"] = v.abort_bound;
    r["abort_ok"] = v.abort_ok;
    if (exclude == "auto") {
      r["m"] = v.m;
      r["delta"] = delta_json(v.delta);
      r["sigma"] = v.sigma;
      r["bound"] = v.bound;
      r["bound_ok"] = v.bound_ok;
      r["verdict"] = !v.ok() ? "FAIL" : (v.inconclusive ? "INCONCLUSIVE" : "PASS");
    }
    if (!v.ok()) status = 1;
    hist_source = v.forced;
  }
  if (!c.csv.empty()) {
    write_text(c.csv, "value,count\n0," + std::to_string(hist_source.zeros) + "\n1," + std::to_string(hist_source.ones) +
                          "\nother," + std::to_string(hist_source.other) + "\ninconsistent," +
                          std::to_string(hist_source.inconsistent) + "\n");
  }
  return r;
}

HybridAdversary::Substitution parse_substitution(const std::string& s) {
  using S = HybridAdversary::Substitution;
  static const std::map<std::string, S> kNames{{"keep", S::keep},   {"constant", S::constant},
                                               {"flip", S::flip},   {"random", S::random},
                                               {"out_of_domain", S::out_of_domain}, {"missing", S::missing}};
  auto it = kNames.find(s);
  if (it == kNames.end()) throw InputError("unknown substitution rule '" + s + "'");
  return it->second;
}

json run_compile(CLI::App& cmd, const Common& c, int& status) {
  const auto f = load_table(cmd.get_option("--table")->as<std::string>());
  const auto t = cmd.get_option("--t")->as<std::size_t>();
  json r;
  r["n"] = f.n;
  r["t"] = t;
  WrappedProtocol w;
  try {
    w = wrap_dominated(f, t);
  } catch (const UnsupportedSubcase& e) {
    r["verdict"] = "UNSUPPORTED_SUBCASE";
    r["reason"] = e.what();
    status = 2;
    return r;
  } catch (const NotDominated& e) {
    r["verdict"] = "NOT_DOMINATED";
    r["reason"] = e.what();
    status = 2;
    return r;
  }
  r["t1"] = w.oracle.t1;
  r["t2"] = w.oracle.t2;
  r["y_star"] = w.y_star;

  HybridAdversary adv;
  const auto corrupt = cmd.get_option("--corrupt")->as<std::string>();
  if (corrupt.empty()) {
    for (std::size_t i = f.n - t; i < f.n; ++i) adv.corrupted.insert(static_cast<PartyId>(i));
  } else {
    adv.corrupted = parse_parties(corrupt, f.n);
  }
  const auto abort = cmd.get_option("--abort")->as<std::string>();
  if (abort == "never") {
    adv.abort = HybridAdversary::Abort::never;
  } else if (abort == "always") {
    adv.abort = HybridAdversary::Abort::always;
  } else if (abort == "coin") {
    adv.abort = HybridAdversary::Abort::coin;
  } else {
    throw InputError("unknown abort rule '" + abort + "'");
  }
  adv.abort_bits = cmd.get_option("--abort-bits")->as<std::uint32_t>();
  adv.substitution = parse_substitution(cmd.get_option("--substitute")->as<std::string>());
  adv.constant = cmd.get_option("--constant")->as<std::uint32_t>();
  r["adversary"] = {{"corrupted", parties_json(adv.corrupted)},
                    {"abort", abort},
                    {"abort_bits", adv.abort_bits},
                    {"substitute", cmd.get_option("--substitute")->as<std::string>()},
                    {"constant", adv.constant}};

  Assignment x(f.n, 0);
  const auto inputs = cmd.get_option("--inputs")->as<std::string>();
  if (!inputs.empty()) {
    if (inputs.size() != f.n) throw InputError("--inputs needs one digit per party");
    for (std::size_t i = 0; i < f.n; ++i) {
      if (inputs[i] < '0' || inputs[i] > '9' || static_cast<std::uint32_t>(inputs[i] - '0') >= f.domains[i]) {
        throw InputError("--inputs digit " + std::to_string(i + 1) + " outside the domain");
      }
      x[i] = static_cast<std::uint32_t>(inputs[i] - '0');
    }
  }
  r["inputs"] = x;

  auto sample = real_execution(w, adv, x, std::vector<std::uint32_t>(adv.coin_radices(f).size(), 0));
  // Honest outputs with every adversary coin at zero.
  json outs = json::array();
  for (const auto& o : sample.first) outs.push_back(o.is_bot() ? std::string("bot") : std::string(o.bytes().begin(), o.bytes().end()));
  r["honest_outputs"] = outs;

  const auto mode = cmd.get_option("--compare")->as<std::string>();
  RealIdealComparison cmp;
  if (mode == "exact") {
    cmp = compare_real_ideal_exact(w, adv, x);
  } else if (mode == "sampled") {
    cmp = compare_real_ideal_sampled(w, adv, x, cmd.get_option("--samples")->as<std::size_t>(), c.seed, c.jobs);
  } else {
    throw InputError("unknown comparison mode '" + mode + "'");
  }
  r["comparison"] = {{"mode", mode},
                     {"distance", cmp.distance},
                     {"samples", cmp.samples},
                     {"real_support", cmp.real_support},
                     {"ideal_support", cmp.ideal_support},
                     {"honest_bot", cmp.real_bot}};
  const double tolerance = cmd.get_option("--tolerance")->as<double>();
  const bool ok = cmp.real_bot == 0 && (cmp.exact ? cmp.distance == 0.0 : cmp.distance < tolerance);
  r["ok"] = ok;
  if (!ok) status = 1;
  return r;
}

json run_consistency(CLI::App& cmd, const Common& c) {
  const auto selector = cmd.get_option("--protocol")->as<std::string>();
  const auto n = cmd.get_option("--n")->as<std::size_t>();
  const auto kind = cmd.get_option("--adversary")->as<std::string>();
  const auto trials = cmd.get_option("--trials")->as<std::size_t>();
  const auto spec = zoo::make_protocol(selector, n);
  json r;
  r["protocol"] = spec.name;
  r["n"] = n;
  r["adversary"] = kind;
  if (kind == "embedding") {
    if (n != 3) throw InputError("the embedding family needs --n 3");
    auto m = cmd.get_option("--m")->as<std::uint32_t>();
    if (m == 0) m = spec.bound == RoundBound::strict ? strict_ring_copies(spec.q) : expected_ring_copies(spec.q);
    r["m"] = m;
    r["delta"] = delta_json(estimate_ring_delta(spec, m, trials, c.seed, c.jobs));
    return r;
  }
  auto corrupt = parse_parties(cmd.get_option("--corrupt")->as<std::string>(), n);
  if (corrupt.empty()) corrupt = {static_cast<PartyId>(n - 1)};
  std::shared_ptr<const AdversaryStrategy> adv;
  if (kind == "passive") {
    adv = std::make_shared<PassiveAdversary>(corrupt);
  } else if (kind == "silent") {
    adv = std::make_shared<SilentAdversary>(corrupt);
  } else if (kind == "equivocator") {
    adv = std::make_shared<EquivocatingAdversary>(corrupt);
  } else {
    throw InputError("unknown adversary '" + kind + "'");
  }
  auto e = estimate_consistency(spec, {adv}, trials, c.seed, c.jobs).front();
  r["corrupted"] = parties_json(corrupt);
  r["trials"] = e.trials;
  r["inconsistent"] = e.inconsistent;
  r["delta_hat"] = e.delta_hat;
  r["ci"] = interval_json(e.ci);
  return r;
}

json run_validate(CLI::App& cmd, const Common& c, int& status) {
  const auto selector = cmd.get_option("--protocol")->as<std::string>();
  const auto n = cmd.get_option("--n")->as<std::size_t>();
  const auto spec = zoo::make_protocol(selector, n);
  auto v = validate_spec(spec, cmd.get_option("--trials")->as<std::size_t>(), c.seed);
  if (!v.ok()) status = 1;
  return {{"protocol", spec.name}, {"n", n}, {"q", spec.q}, {"trials", v.trials}, {"violations", v.violations},
          {"ok", v.ok()}};
}

// ---------------------------------------------------------------------------
// Config handling

/// Flags equivalent to a config object (or a report carrying one).
std::vector<std::string> config_args(const std::string& path, std::string& command) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  if (j.contains("config") && j["config"].is_object()) {
    if (j.contains("command") && j["command"].is_string()) command = j["command"].get<std::string>();
    j = j["config"];
  }
  if (!j.is_object()) throw InputError(path + ": config must be a JSON object");
  std::vector<std::string> args;
  for (auto& [key, value] : j.items()) {
    if (kNotConfig.count(key)) continue;
    args.push_back("--" + key);
    args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  return args;
}

json effective_config(const CLI::App& cmd) {
  json cfg = json::object();
  for (const auto* opt : cmd.get_options()) {
    const auto name = opt->get_single_name();
    if (kNotConfig.count(name)) continue;
    std::string value;
    if (opt->count() > 0) {
      value = opt->as<std::string>();
    } else {
      value = opt->get_default_str();
    }
    cfg[name] = value;
  }
  return cfg;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("RINGBREAK_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InputError("RINGBREAK_SEED is not an unsigned integer");
    }
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    // Expand --config into flags placed before the user's own flags so the
    // command line wins.
    std::string file_command;
    std::vector<std::string> from_file;
    for (std::size_t i = 1; i + 1 < args.size(); ++i) {
      if (args[i] == "--config") from_file = config_args(args[i + 1], file_command);
    }
    if (args.size() < 2 || args[1].rfind("-", 0) == 0) {
      if (!file_command.empty()) args.insert(args.begin() + 1, file_command);
    }
    if (args.size() >= 2) args.insert(args.begin() + 2, from_file.begin(), from_file.end());

    CLI::App app{"Ring-composition attacks, dominance analysis and coin-flip bias experiments"};
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    Common c;
    c.seed = default_seed();
    std::string transcript;
    auto common = [&](CLI::App* s) {
      s->add_option("--seed", c.seed, "master seed (env RINGBREAK_SEED)");
      s->add_option("--jobs", c.jobs, "worker threads");
      s->add_option("--out", c.out, "report path (default stdout)");
      s->add_option("--csv", c.csv, "CSV export path");
      s->add_option("--config", c.config, "JSON config or report to re-run");
    };

    auto* attack = app.add_subcommand("attack", "ring output-forcing attack");
    common(attack);
    attack->add_option("--protocol", "zoo protocol selector")->default_str("echo_xor:2");
    attack->add_option("--n", "party count")->default_str("3");
    attack->add_option("--t", "corruption threshold")->default_str("1");
    attack->add_option("--corrupt", "corrupted parties, 1-based, comma separated")->default_str("");
    attack->add_option("--variant", "strict or expected")->default_str("strict")->check(CLI::IsMember({"strict", "expected"}));
    attack->add_option("--z", "phase-1 iterations (expected variant)")->default_str("8");
    attack->add_option("--trials", "attack trials")->default_str("1000");
    attack->add_option("--delta-trials", "trials per embedding adversary")->default_str("1000");
    attack->add_option("--online-cap", "round cap for expected runs (0 = 64q)")->default_str("0");
    attack->add_option("--transcript", transcript, "JSONL transcript of trial 0");

    auto* dominance = app.add_subcommand("dominance", "dominance profile and classification");
    common(dominance);
    dominance->add_option("--table", "table JSON file")->required();
    dominance->add_option("--k", "decide weak/strong k-dominance (0 = skip)")->default_str("0");
    dominance->add_option("--t", "classify for t corruptions (0 = skip)")->default_str("0");
    dominance->add_option("--budget", "largest table size")->default_str(std::to_string(kDefaultTableBudget));

    auto* coinflip = app.add_subcommand("coinflip", "coin-flip bias measurement");
    common(coinflip);
    coinflip->add_option("--protocol", "zoo protocol selector")->default_str("fair_coin");
    coinflip->add_option("--n", "party count")->default_str("3");
    coinflip->add_option("--mode", "honest or attack")->default_str("honest")->check(CLI::IsMember({"honest", "attack"}));
    coinflip->add_option("--kappa", "phase-1 attempts")->default_str("10");
    coinflip->add_option("--exclude", "value the attack avoids: auto, 0 or 1")->default_str("auto")->check(CLI::IsMember({"auto", "0", "1"}));
    coinflip->add_option("--trials", "trials")->default_str("10000");
    coinflip->add_option("--delta-trials", "trials per embedding adversary")->default_str("1000");

    auto* compile = app.add_subcommand("compile", "threshold wrapper for dominated tables");
    common(compile);
    compile->add_option("--table", "table JSON file")->required();
    compile->add_option("--t", "corruption threshold")->default_str("3");
    compile->add_option("--corrupt", "corrupted parties (default: last t)")->default_str("");
    compile->add_option("--abort", "never, always or coin")->default_str("never");
    compile->add_option("--abort-bits", "coin rule aborts when all bits are 1")->default_str("1");
    compile->add_option("--substitute", "keep, constant, flip, random, out_of_domain, missing")->default_str("keep");
    compile->add_option("--constant", "value for --substitute constant")->default_str("0");
    compile->add_option("--inputs", "one digit per party (default all zero)")->default_str("");
    compile->add_option("--compare", "exact or sampled")->default_str("exact");
    compile->add_option("--samples", "samples for sampled comparison")->default_str("100000");
    compile->add_option("--tolerance", "sampled distance tolerance")->default_str("0.01");

    auto* consistency = app.add_subcommand("consistency", "inconsistency rate under an adversary");
    common(consistency);
    consistency->add_option("--protocol", "zoo protocol selector")->default_str("echo_xor:2");
    consistency->add_option("--n", "party count")->default_str("3");
    consistency->add_option("--adversary", "passive, silent, equivocator or embedding")->default_str("embedding");
    consistency->add_option("--corrupt", "corrupted parties (default: last)")->default_str("");
    consistency->add_option("--m", "ring copies for embedding (0 = attack size)")->default_str("0");
    consistency->add_option("--trials", "trials")->default_str("1000");

    auto* validate = app.add_subcommand("validate", "check a zoo protocol against the execution contract");
    common(validate);
    validate->add_option("--protocol", "zoo protocol selector")->default_str("xor_exchange");
    validate->add_option("--n", "party count")->default_str("3");
    validate->add_option("--trials", "trials")->default_str("200");

    try {
      std::vector<const char*> cargs;
      for (auto& a : args) cargs.push_back(a.c_str());
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }

    // Options without a bound variable read their default string.
    for (auto* sub : app.get_subcommands()) {
      for (auto* opt : sub->get_options()) {
        if (opt->count() == 0 && !opt->get_default_str().empty() && opt->get_single_name() != "help") {
          opt->add_result(opt->get_default_str());
        }
      }
    }

    CLI::App* cmd = app.get_subcommands().front();
    int status = 0;
    json result;
    const auto name = cmd->get_name();
    if (name == "attack") {
      result = run_attack(*cmd, c, transcript, status);
    } else if (name == "dominance") {
      result = run_dominance(*cmd, c);
    } else if (name == "coinflip") {
      result = run_coinflip(*cmd, c, status);
    } else if (name == "compile") {
      result = run_compile(*cmd, c, status);
    } else if (name == "consistency") {
      result = run_consistency(*cmd, c);
    } else {
      result = run_validate(*cmd, c, status);
    }

    json report;
    report["schema_version"] = kSchemaVersion;
    report["command"] = name;
    report["config"] = effective_config(*cmd);
    report["result"] = result;
    write_text(c.out, report.dump(2) + "\n");
    return status;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TableFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
