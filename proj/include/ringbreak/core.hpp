#pragma once

// Protocol and execution data model: byte strings, outcomes, coin streams,
// party programs as round-driven state machines, protocol specs and joint
// inputs.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ringbreak {

using Bytes = std::vector<std::uint8_t>;
using PartyId = std::uint32_t;
using Round = std::uint32_t;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A program broke its declared contract (round bound, message cap, ...).
class SpecViolation : public Error {
 public:
  using Error::Error;
};

/// A message was addressed over an edge the topology does not have.
class TopologyViolation : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its documented preconditions.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A strict program read past its finite coin prefix.
class CoinBudgetExceeded : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Byte helpers

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_hex(const Bytes& b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (auto c : b) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

inline Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw PreconditionError("invalid hex digit");
  };
  if (hex.size() % 2 != 0) throw PreconditionError("odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::optional<std::uint32_t> get_u32(const Bytes& in, std::size_t& pos) {
  if (pos + 4 > in.size()) return std::nullopt;
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

// ---------------------------------------------------------------------------
// Hashing and seed derivation

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const Bytes& data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (auto c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stable per-trial seed: independent trials never share coins.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return mix64(master ^ fnv1a64(label));
}

// ---------------------------------------------------------------------------
// Outcome

/// A party's output: a byte string or the distinguished error symbol BOT.
/// BOT orders before every value and differs from the empty string.
class Outcome {
 public:
  static Outcome bot() { return Outcome(); }
  static Outcome value(Bytes v) { return Outcome(std::move(v)); }
  static Outcome value(std::string_view v) { return Outcome(to_bytes(v)); }
  static Outcome byte(std::uint8_t b) { return Outcome(Bytes{b}); }

  bool is_bot() const { return !value_.has_value(); }
  const Bytes& bytes() const {
    if (!value_) throw PreconditionError("BOT has no value");
    return *value_;
  }

  /// "bot" for BOT, otherwise the lowercase hex of the value.
  std::string describe() const { return value_ ? "0x" + to_hex(*value_) : std::string("bot"); }

  friend bool operator==(const Outcome&, const Outcome&) = default;
  friend auto operator<=>(const Outcome&, const Outcome&) = default;

 private:
  Outcome() = default;
  explicit Outcome(Bytes v) : value_(std::move(v)) {}

  std::optional<Bytes> value_;
};

// ---------------------------------------------------------------------------
// CoinStream

/// Deterministic byte stream keyed by (master seed, label).
///
/// The generator is SplitMix64 started at mix64(seed ^ FNV-1a(label)); each
/// 64-bit output word is emitted as 8 little-endian bytes. All typed readers
/// are defined in terms of bytes, so results are identical on every platform.
/// An optional budget caps the number of bytes a strict program may consume.
class CoinStream {
 public:
  CoinStream() = default;
  CoinStream(std::uint64_t seed, std::string_view label, std::optional<std::size_t> budget = {})
      : state_(mix64(seed ^ fnv1a64(label))), budget_(budget) {}

  std::uint8_t next_byte() {
    if (budget_ && consumed_ >= *budget_) {
      throw CoinBudgetExceeded("coin budget of " + std::to_string(*budget_) + " bytes exhausted");
    }
    if (buffered_ == 0) {
      state_ += 0x9e3779b97f4a7c15ULL;
      buffer_ = mix64(state_);
      buffered_ = 8;
    }
    auto b = static_cast<std::uint8_t>(buffer_ & 0xff);
    buffer_ >>= 8;
    --buffered_;
    ++consumed_;
    return b;
  }

  Bytes take(std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = next_byte();
    return out;
  }

  std::uint64_t next_u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(next_byte()) << (8 * i);
    return v;
  }

  bool next_bit() { return (next_byte() & 1) != 0; }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw PreconditionError("next_below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
      auto v = next_u64();
      if (v < limit) return v % bound;
    }
  }

  std::size_t consumed() const { return consumed_; }
  std::optional<std::size_t> budget() const { return budget_; }

  friend bool operator==(const CoinStream&, const CoinStream&) = default;

 private:
  std::uint64_t state_ = 0;
  std::uint64_t buffer_ = 0;
  int buffered_ = 0;
  std::size_t consumed_ = 0;
  std::optional<std::size_t> budget_;
};

inline CoinStream derive_coins(std::uint64_t master_seed, std::string_view label,
                               std::optional<std::size_t> budget = {}) {
  return CoinStream(master_seed, label, budget);
}

// ---------------------------------------------------------------------------
// Party programs

using Inbox = std::map<PartyId, Bytes>;
using Outbox = std::map<PartyId, Bytes>;

/// Complete state of one party. Programs keep their memory in `regs`;
/// composite programs nest member states in `members`.
struct PartyState {
  Bytes input;
  CoinStream coins;
  std::vector<Bytes> regs;
  std::vector<PartyState> members;
  std::optional<Outcome> outcome;
};

inline bool operator==(const PartyState& a, const PartyState& b) {
  return a.input == b.input && a.coins == b.coins && a.regs == b.regs && a.members == b.members &&
         a.outcome == b.outcome;
}

struct StepResult {
  PartyState state;
  Outbox outbox;
};

/// A deterministic round-driven party. `step` must be a pure function of its
/// arguments. Peers are addressed by their party index in the protocol the
/// program was written for; embeddings (rings, fusions) relabel them.
class PartyProgram {
 public:
  virtual ~PartyProgram() = default;

  virtual std::string role() const = 0;

  /// Peers this program may address. Defaults to every other party of an
  /// `n`-party protocol, set by the owning spec.
  virtual std::vector<PartyId> peers() const = 0;

  virtual PartyState init(Bytes input, CoinStream coins) const = 0;
  virtual StepResult step(const PartyState& state, Round round, const Inbox& inbox) const = 0;

  std::optional<Outcome> finished(const PartyState& state) const { return state.outcome; }
};

/// Base for well-behaved programs: once an outcome is set, every further
/// step returns the state unchanged with an empty outbox.
class HaltingProgram : public PartyProgram {
 public:
  HaltingProgram(PartyId self, std::size_t n) : self_(self), n_(n) {}

  std::string role() const override { return "P" + std::to_string(self_ + 1); }

  std::vector<PartyId> peers() const override {
    std::vector<PartyId> out;
    for (PartyId i = 0; i < n_; ++i)
      if (i != self_) out.push_back(i);
    return out;
  }

  PartyState init(Bytes input, CoinStream coins) const override {
    PartyState s;
    s.input = std::move(input);
    s.coins = std::move(coins);
    start(s);
    return s;
  }

  StepResult step(const PartyState& state, Round round, const Inbox& inbox) const final {
    if (state.outcome) return {state, {}};
    StepResult r{state, {}};
    run(r.state, round, inbox, r.outbox);
    return r;
  }

  PartyId self() const { return self_; }
  std::size_t party_count() const { return n_; }

 protected:
  virtual void start(PartyState&) const {}
  virtual void run(PartyState& s, Round round, const Inbox& inbox, Outbox& out) const = 0;

 private:
  PartyId self_;
  std::size_t n_;
};

// ---------------------------------------------------------------------------
// Protocol specs and inputs

enum class RoundBound { strict, expected };

struct ProtocolSpec {
  std::string name;
  std::vector<std::shared_ptr<const PartyProgram>> programs;
  RoundBound bound = RoundBound::strict;
  /// Strict: every party halts by step q. Expected: declared expected rounds.
  Round q = 1;
  /// Input length in bytes for every party.
  std::size_t kappa = 1;
  /// Finite coin prefix for strict programs; unbounded when empty.
  std::optional<std::size_t> coin_budget;
  /// Declared input values per party (each of length kappa). Empty means
  /// every byte string of length kappa.
  std::vector<Bytes> input_domain;

  std::size_t n() const { return programs.size(); }

  Round default_max_rounds() const { return bound == RoundBound::strict ? 4 * q : 64 * q; }
};

/// One party's share of a joint input: its actual input and the label its
/// coin stream is derived from. The pair plays the role of w in ring
/// constructions.
struct PartyInput {
  Bytes input;
  std::string coin_label;

  friend bool operator==(const PartyInput&, const PartyInput&) = default;
};

struct JointInput {
  std::vector<PartyInput> entries;

  std::size_t size() const { return entries.size(); }
  const PartyInput& operator[](std::size_t i) const { return entries[i]; }
  PartyInput& operator[](std::size_t i) { return entries[i]; }

  friend bool operator==(const JointInput&, const JointInput&) = default;
};

inline CoinStream coins_for(const ProtocolSpec& spec, std::uint64_t seed, const PartyInput& in) {
  return derive_coins(seed, in.coin_label, spec.coin_budget);
}

/// Input value i of the declared domain, or a little-endian encoding of `v`
/// padded to kappa bytes when the domain is open.
inline Bytes sample_input(const ProtocolSpec& spec, CoinStream& rng) {
  if (!spec.input_domain.empty()) return spec.input_domain[rng.next_below(spec.input_domain.size())];
  return rng.take(spec.kappa);
}

/// Joint input with labels "P1".."Pn" and the given per-party inputs.
inline JointInput make_joint_input(std::vector<Bytes> inputs) {
  JointInput w;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    w.entries.push_back({std::move(inputs[i]), "P" + std::to_string(i + 1)});
  }
  return w;
}

inline JointInput random_joint_input(const ProtocolSpec& spec, std::uint64_t seed) {
  CoinStream rng(seed, "joint-input");
  std::vector<Bytes> inputs;
  for (std::size_t i = 0; i < spec.n(); ++i) inputs.push_back(sample_input(spec, rng));
  return make_joint_input(std::move(inputs));
}

inline JointInput zero_joint_input(const ProtocolSpec& spec) {
  return make_joint_input(std::vector<Bytes>(spec.n(), Bytes(spec.kappa, 0)));
}

}  // namespace ringbreak
