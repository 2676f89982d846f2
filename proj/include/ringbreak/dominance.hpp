#pragma once

// Weak and strong k-dominance of finite symmetric functionalities, decided by
// exhaustive search over truth tables.
//
// f is weakly k-dominated when every k-subset I of input positions has an
// assignment x_I that fixes the output regardless of the other inputs; it is
// (strongly) k-dominated when one value y* is forceable by every k-subset.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ringbreak/core.hpp"

namespace ringbreak {

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// Orders tokens by their byte encoding.
inline bool token_less(const std::string& a, const std::string& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return static_cast<unsigned char>(x) < static_cast<unsigned char>(y);
  });
}

using Assignment = std::vector<std::uint32_t>;

/// Dense truth table. Entries are in mixed-radix row-major order: x_1 is the
/// most significant digit.
struct FunctionTable {
  std::size_t n = 0;
  std::vector<std::uint32_t> domains;
  std::vector<std::string> outputs;

  std::size_t size() const {
    std::size_t s = 1;
    for (auto d : domains) s *= d;
    return s;
  }

  void validate() const {
    if (n == 0 || domains.size() != n) throw PreconditionError("table needs n >= 1 and one domain per party");
    for (auto d : domains)
      if (d < 1) throw PreconditionError("domain sizes must be >= 1");
    if (outputs.size() != size()) {
      throw PreconditionError("table has " + std::to_string(outputs.size()) + " outputs, expected " +
                              std::to_string(size()));
    }
  }

  std::size_t index(const Assignment& x) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] >= domains[i]) throw PreconditionError("input " + std::to_string(i + 1) + " outside its domain");
      idx = idx * domains[i] + x[i];
    }
    return idx;
  }

  Assignment tuple(std::size_t idx) const {
    Assignment x(n);
    for (std::size_t i = n; i-- > 0;) {
      x[i] = static_cast<std::uint32_t>(idx % domains[i]);
      idx /= domains[i];
    }
    return x;
  }

  const std::string& at(const Assignment& x) const { return outputs[index(x)]; }

  /// Distinct outputs in byte order.
  std::vector<std::string> range() const {
    std::vector<std::string> r(outputs.begin(), outputs.end());
    std::sort(r.begin(), r.end(), token_less);
    r.erase(std::unique(r.begin(), r.end()), r.end());
    return r;
  }
};

/// Table of fn over the full product domain.
inline FunctionTable make_table(std::vector<std::uint32_t> domains,
                                const std::function<std::string(const Assignment&)>& fn) {
  FunctionTable f;
  f.n = domains.size();
  f.domains = std::move(domains);
  const auto total = f.size();
  f.outputs.reserve(total);
  for (std::size_t i = 0; i < total; ++i) f.outputs.push_back(fn(f.tuple(i)));
  return f;
}

inline FunctionTable boolean_table(std::size_t n, const std::function<bool(const Assignment&)>& fn) {
  return make_table(std::vector<std::uint32_t>(n, 2), [&](const Assignment& x) { return fn(x) ? "1" : "0"; });
}

inline FunctionTable or_table(std::size_t n) {
  return boolean_table(n, [](const Assignment& x) { return std::count(x.begin(), x.end(), 1u) > 0; });
}

inline FunctionTable xor_table(std::size_t n) {
  return boolean_table(n, [](const Assignment& x) { return std::count(x.begin(), x.end(), 1u) % 2 == 1; });
}

/// 1 iff at least k inputs are 1.
inline FunctionTable threshold_table(std::size_t n, std::size_t k) {
  return boolean_table(n, [k](const Assignment& x) { return static_cast<std::size_t>(std::count(x.begin(), x.end(), 1u)) >= k; });
}

/// (x1 AND x2) OR (x3 AND x4).
inline FunctionTable and_pairs_table() {
  return boolean_table(4, [](const Assignment& x) { return (x[0] && x[1]) || (x[2] && x[3]); });
}

inline FunctionTable constant_table(std::vector<std::uint32_t> domains, std::string token) {
  return make_table(std::move(domains), [&](const Assignment&) { return token; });
}

// ---------------------------------------------------------------------------
// Enumeration helpers

/// k-subsets of {0..n-1} in lexicographic order.
inline std::vector<std::vector<PartyId>> subsets_of_size(std::size_t n, std::size_t k) {
  std::vector<std::vector<PartyId>> out;
  if (k > n) return out;
  std::vector<PartyId> cur(k);
  for (std::size_t i = 0; i < k; ++i) cur[i] = static_cast<PartyId>(i);
  for (;;) {
    out.push_back(cur);
    std::size_t i = k;
    while (i > 0 && cur[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++cur[i - 1];
    for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

/// Calls fn on every assignment to `positions` in mixed-radix order (first
/// position most significant) until it returns false.
template <class Fn>
void for_each_assignment(const FunctionTable& f, const std::vector<PartyId>& positions, Fn&& fn) {
  Assignment a(positions.size(), 0);
  for (;;) {
    if (!fn(static_cast<const Assignment&>(a))) return;
    std::size_t i = positions.size();
    while (i > 0) {
      --i;
      if (++a[i] < f.domains[positions[i]]) break;
      a[i] = 0;
      if (i == 0) return;
    }
    if (positions.empty()) return;
  }
}

/// The output common to every completion of x_I, if there is one.
inline std::optional<std::string> forced_value(const FunctionTable& f, const std::vector<PartyId>& I,
                                               const Assignment& x_I) {
  if (I.size() != x_I.size()) throw PreconditionError("assignment length differs from subset size");
  std::vector<bool> fixed(f.n, false);
  for (std::size_t j = 0; j < I.size(); ++j) {
    if (I[j] >= f.n) throw PreconditionError("subset index out of range");
    if (x_I[j] >= f.domains[I[j]]) throw PreconditionError("assignment outside the domain of party " + std::to_string(I[j] + 1));
    fixed[I[j]] = true;
  }
  std::vector<PartyId> free;
  for (PartyId i = 0; i < f.n; ++i)
    if (!fixed[i]) free.push_back(i);

  Assignment x(f.n, 0);
  for (std::size_t j = 0; j < I.size(); ++j) x[I[j]] = x_I[j];
  const std::string* value = nullptr;
  bool constant = true;
  for_each_assignment(f, free, [&](const Assignment& rest) {
    for (std::size_t j = 0; j < free.size(); ++j) x[free[j]] = rest[j];
    const auto& y = f.outputs[f.index(x)];
    if (!value) {
      value = &y;
    } else if (y != *value) {
      constant = false;
    }
    return constant;
  });
  if (!constant || !value) return std::nullopt;
  return *value;
}

// ---------------------------------------------------------------------------
// Deciders

struct SubsetForcing {
  std::vector<PartyId> subset;
  std::string value;
  Assignment assignment;
};

struct DominanceWitness {
  std::size_t k = 0;
  bool strong = false;
  /// One entry per k-subset, subsets in lexicographic order.
  std::vector<SubsetForcing> forcings;
  /// Strong witnesses: every value forceable by all k-subsets, in byte order.
  std::vector<std::string> qualifying;

  const std::string& y_star() const {
    if (!strong) throw PreconditionError("weak witnesses have no single y*");
    return forcings.front().value;
  }
};

namespace detail {

/// For every k-subset, the forceable values with their first forcing
/// assignment in mixed-radix order.
inline std::vector<std::map<std::string, Assignment>> forcing_sets(const FunctionTable& f,
                                                                   const std::vector<std::vector<PartyId>>& subsets,
                                                                   bool stop_on_empty) {
  std::vector<std::map<std::string, Assignment>> out;
  for (const auto& I : subsets) {
    std::map<std::string, Assignment> values;
    for_each_assignment(f, I, [&](const Assignment& a) {
      if (auto y = forced_value(f, I, a)) values.emplace(*y, a);
      return true;
    });
    const bool empty = values.empty();
    out.push_back(std::move(values));
    if (empty && stop_on_empty) break;
  }
  return out;
}

inline void check_k(const FunctionTable& f, std::size_t k) {
  f.validate();
  if (k < 1 || k > f.n) throw PreconditionError("k must satisfy 0 < k <= n");
}

}  // namespace detail

/// Weak witness: for each subset (lexicographic), the first assignment in
/// mixed-radix order that forces some value.
inline std::optional<DominanceWitness> is_weakly_k_dominated(const FunctionTable& f, std::size_t k) {
  detail::check_k(f, k);
  DominanceWitness w;
  w.k = k;
  for (const auto& I : subsets_of_size(f.n, k)) {
    std::optional<SubsetForcing> hit;
    for_each_assignment(f, I, [&](const Assignment& a) {
      if (auto y = forced_value(f, I, a)) {
        hit = SubsetForcing{I, *y, a};
        return false;
      }
      return true;
    });
    if (!hit) return std::nullopt;
    w.forcings.push_back(std::move(*hit));
  }
  return w;
}

/// Strong witness with the byte-smallest qualifying y*; every qualifying
/// value is listed.
inline std::optional<DominanceWitness> is_k_dominated(const FunctionTable& f, std::size_t k) {
  detail::check_k(f, k);
  const auto subsets = subsets_of_size(f.n, k);
  const auto sets = detail::forcing_sets(f, subsets, true);
  if (sets.size() != subsets.size() || sets.back().empty()) return std::nullopt;
  std::vector<std::string> qualifying;
  for (const auto& y : f.range()) {
    bool all = true;
    for (const auto& s : sets)
      if (!s.count(y)) {
        all = false;
        break;
      }
    if (all) qualifying.push_back(y);
  }
  if (qualifying.empty()) return std::nullopt;
  DominanceWitness w;
  w.k = k;
  w.strong = true;
  w.qualifying = qualifying;
  const auto& y = qualifying.front();
  for (std::size_t i = 0; i < subsets.size(); ++i) w.forcings.push_back({subsets[i], y, sets[i].at(y)});
  return w;
}

/// Re-checks every stored forcing against the table.
inline bool recheck_witness(const FunctionTable& f, const DominanceWitness& w) {
  const auto subsets = subsets_of_size(f.n, w.k);
  if (w.forcings.size() != subsets.size()) return false;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    const auto& e = w.forcings[i];
    if (e.subset != subsets[i]) return false;
    auto y = forced_value(f, e.subset, e.assignment);
    if (!y || *y != e.value) return false;
    if (w.strong && e.value != w.forcings.front().value) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Profiles

struct ProfileRow {
  std::size_t k = 0;
  bool weak = false;
  bool strong = false;
  std::optional<std::string> y_star;
};

struct DominanceProfile {
  std::vector<ProfileRow> rows;
  std::optional<std::size_t> minimal_strong_k;
  /// Strong k-dominance implies strong (k+1)-dominance across the rows.
  bool monotone = true;
};

inline constexpr std::size_t kDefaultTableBudget = std::size_t{1} << 24;

inline DominanceProfile dominance_profile(const FunctionTable& f, std::size_t budget = kDefaultTableBudget) {
  f.validate();
  if (f.size() > budget) {
    throw BudgetExceeded("table has " + std::to_string(f.size()) + " entries, budget is " + std::to_string(budget));
  }
  DominanceProfile p;
  for (std::size_t k = 1; k <= f.n; ++k) {
    const auto subsets = subsets_of_size(f.n, k);
    const auto sets = detail::forcing_sets(f, subsets, false);
    ProfileRow row;
    row.k = k;
    row.weak = std::all_of(sets.begin(), sets.end(), [](const auto& s) { return !s.empty(); });
    if (row.weak) {
      for (const auto& y : f.range()) {
        if (std::all_of(sets.begin(), sets.end(), [&](const auto& s) { return s.count(y) > 0; })) {
          row.strong = true;
          row.y_star = y;
          break;
        }
      }
    }
    if (row.strong && !p.minimal_strong_k) p.minimal_strong_k = k;
    if (!p.rows.empty() && p.rows.back().strong && !row.strong) p.monotone = false;
    p.rows.push_back(std::move(row));
  }
  return p;
}

inline std::string profile_csv(const DominanceProfile& p) {
  std::string out = "k,weak,strong,y_star\n";
  for (const auto& r : p.rows) {
    out += std::to_string(r.k) + "," + (r.weak ? "1" : "0") + "," + (r.strong ? "1" : "0") + "," +
           r.y_star.value_or("") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weak implies strong for small k

struct WeakStrongVerdict {
  std::size_t m = 0;
  bool weak = false;
  bool strong = false;
  /// Set when f is weakly but not strongly m-dominated.
  std::optional<DominanceWitness> counterexample;

  bool holds() const { return !weak || strong; }
};

inline WeakStrongVerdict verify_weak_implies_strong(const FunctionTable& f, std::size_t m) {
  f.validate();
  if (m < 1 || 3 * m > f.n) {
    throw PreconditionError("weak-implies-strong applies only for 1 <= m <= n/3 (m=" + std::to_string(m) +
                            ", n=" + std::to_string(f.n) + ")");
  }
  WeakStrongVerdict v;
  v.m = m;
  auto weak = is_weakly_k_dominated(f, m);
  v.weak = weak.has_value();
  v.strong = is_k_dominated(f, m).has_value();
  if (v.weak && !v.strong) v.counterexample = std::move(weak);
  return v;
}

// ---------------------------------------------------------------------------
// Classification

enum class Computability { computable, not_computable, conditional };

inline const char* to_string(Computability c) {
  switch (c) {
    case Computability::computable:
      return "COMPUTABLE";
    case Computability::not_computable:
      return "NOT_COMPUTABLE";
    default:
      return "CONDITIONAL";
  }
}

struct Classification {
  Computability verdict = Computability::not_computable;
  std::size_t n = 0;
  std::size_t t = 0;
  /// Dominance order that decides the verdict: n-2t, or 1 without honest majority.
  std::size_t k = 0;
  std::optional<std::string> y_star;
  std::string reason;
};

/// Computability with t corruptions in the point-to-point model, n/3 <= t < n.
inline Classification classify(const FunctionTable& f, std::size_t t) {
  f.validate();
  const auto n = f.n;
  if (n < 3) throw PreconditionError("classification needs n >= 3");
  if (3 * t < n) throw PreconditionError("classification needs t >= n/3");
  if (t >= n) throw PreconditionError("classification needs t < n");
  Classification c;
  c.n = n;
  c.t = t;
  if (2 * t < n) {
    c.k = n - 2 * t;
    auto w = is_k_dominated(f, c.k);
    if (w) {
      c.verdict = Computability::computable;
      c.y_star = w->y_star();
      c.reason = std::to_string(c.k) + "-dominated";
    } else {
      c.verdict = Computability::not_computable;
      c.reason = "not " + std::to_string(c.k) + "-dominated";
    }
    return c;
  }
  c.k = 1;
  auto w = is_k_dominated(f, 1);
  if (!w) {
    c.verdict = Computability::not_computable;
    c.reason = "not 1-dominated";
    return c;
  }
  c.verdict = Computability::conditional;
  c.y_star = w->y_star();
  c.reason = "1-dominated; requires a t-secure protocol in the broadcast model";
  return c;
}

}  // namespace ringbreak
