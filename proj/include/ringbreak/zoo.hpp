#pragma once

// Reference protocols used as attack targets and test vehicles.
//
//   const:c          outputs byte c at round 1, never talks
//   xor_exchange     one full exchange of input bits, output XOR
//   or_exchange      same exchange, output OR
//   echo_xor:e       xor_exchange plus e echo rounds; a directly received
//                    bit is overridden only when every echo contradicts it
//   fair_coin        xor_exchange on a fresh coin bit instead of the input
//   geom_halt:p[:q]  halts each round with probability p, outputs a coin bit;
//                    q is the declared expected round bound (default ceil(1/p))

#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ringbreak/core.hpp"

namespace ringbreak::zoo {

inline std::uint8_t bit_of(const Bytes& b) { return b.empty() ? 0 : (b[0] & 1); }

class ConstProgram : public HaltingProgram {
 public:
  ConstProgram(PartyId self, std::size_t n, std::uint8_t c) : HaltingProgram(self, n), c_(c) {}

 protected:
  void run(PartyState& s, Round, const Inbox&, Outbox&) const override { s.outcome = Outcome::byte(c_); }

 private:
  std::uint8_t c_;
};

/// One round of sending a bit to every peer; combine on receipt.
class ExchangeProgram : public HaltingProgram {
 public:
  enum class Combine { bit_xor, bit_or };
  enum class Source { input, coin };

  ExchangeProgram(PartyId self, std::size_t n, Combine combine, Source source)
      : HaltingProgram(self, n), combine_(combine), source_(source) {}

 protected:
  void start(PartyState& s) const override {
    const std::uint8_t bit = source_ == Source::coin ? static_cast<std::uint8_t>(s.coins.next_bit()) : bit_of(s.input);
    s.regs = {Bytes{bit}};
  }

  void run(PartyState& s, Round round, const Inbox& inbox, Outbox& out) const override {
    const std::uint8_t mine = s.regs[0][0];
    if (round == 1) {
      for (auto p : peers()) out[p] = Bytes{mine};
      return;
    }
    std::uint8_t acc = mine;
    for (auto p : peers()) {
      auto it = inbox.find(p);
      const std::uint8_t b = it == inbox.end() ? 0 : bit_of(it->second);
      acc = combine_ == Combine::bit_xor ? static_cast<std::uint8_t>(acc ^ b) : static_cast<std::uint8_t>(acc | b);
    }
    s.outcome = Outcome::byte(acc);
  }

 private:
  Combine combine_;
  Source source_;
};

/// xor_exchange followed by `echoes` rounds in which every party reports to
/// each peer the bits it received directly from everybody else.
class EchoXorProgram : public HaltingProgram {
 public:
  EchoXorProgram(PartyId self, std::size_t n, Round echoes) : HaltingProgram(self, n), echoes_(echoes) {}

 protected:
  static constexpr std::uint8_t kMissing = 0xff;

  // regs: [0] own bit, [1] direct bit per party, [2] echo count per party,
  // [3] contradicting echo count per party.
  void start(PartyState& s) const override {
    const auto n = party_count();
    s.regs = {Bytes{bit_of(s.input)}, Bytes(n, kMissing), Bytes(n, 0), Bytes(n, 0)};
  }

  void run(PartyState& s, Round round, const Inbox& inbox, Outbox& out) const override {
    const auto n = party_count();
    auto& direct = s.regs[1];
    if (round == 1) {
      for (auto p : peers()) out[p] = Bytes{s.regs[0][0]};
      return;
    }
    if (round == 2) {
      for (auto p : peers()) {
        auto it = inbox.find(p);
        direct[p] = it == inbox.end() || it->second.empty() ? kMissing : bit_of(it->second);
      }
    } else {
      for (auto& [from, payload] : inbox) {
        if (payload.size() != n) continue;
        for (PartyId y = 0; y < n; ++y) {
          if (y == self() || y == from || payload[y] == kMissing) continue;
          ++s.regs[2][y];
          const std::uint8_t d = direct[y] == kMissing ? 0 : direct[y];
          if ((payload[y] & 1) != d) ++s.regs[3][y];
        }
      }
    }
    if (round <= echoes_ + 1) {
      for (auto p : peers()) {
        Bytes report(n, kMissing);
        for (PartyId y = 0; y < n; ++y)
          if (y != p && y != self()) report[y] = direct[y];
        out[p] = std::move(report);
      }
      return;
    }
    std::uint8_t acc = s.regs[0][0];
    for (auto y : peers()) {
      std::uint8_t v = direct[y] == kMissing ? 0 : direct[y];
      if (s.regs[2][y] > 0 && s.regs[3][y] == s.regs[2][y]) v ^= 1;
      acc ^= v;
    }
    s.outcome = Outcome::byte(acc);
  }

 private:
  Round echoes_;
};

/// Flips a p-coin every round; heads halts with a pre-drawn output bit,
/// tails sends a one-byte heartbeat to every peer.
class GeomHaltProgram : public HaltingProgram {
 public:
  GeomHaltProgram(PartyId self, std::size_t n, double p) : HaltingProgram(self, n), p_(p) {}

 protected:
  void start(PartyState& s) const override { s.regs = {Bytes{static_cast<std::uint8_t>(s.coins.next_bit())}}; }

  void run(PartyState& s, Round, const Inbox&, Outbox& out) const override {
    if (s.coins.next_unit() < p_) {
      s.outcome = Outcome::byte(s.regs[0][0]);
      return;
    }
    for (auto p : peers()) out[p] = Bytes{1};
  }

 private:
  double p_;
};

// ---------------------------------------------------------------------------
// Spec constructors

namespace detail {

template <class Make>
ProtocolSpec build(std::string name, std::size_t n, RoundBound bound, Round q, Make make) {
  if (n < 2) throw PreconditionError("protocols need at least two parties");
  ProtocolSpec spec;
  spec.name = std::move(name);
  spec.bound = bound;
  spec.q = q;
  spec.kappa = 1;
  spec.input_domain = {Bytes{0}, Bytes{1}};
  for (PartyId i = 0; i < n; ++i) spec.programs.push_back(make(i));
  return spec;
}

}  // namespace detail

inline ProtocolSpec const_protocol(std::size_t n, std::uint8_t c) {
  auto spec = detail::build("const:" + std::to_string(c), n, RoundBound::strict, 1,
                            [&](PartyId i) { return std::make_shared<ConstProgram>(i, n, c); });
  spec.coin_budget = 0;
  return spec;
}

inline ProtocolSpec xor_exchange(std::size_t n) {
  auto spec = detail::build("xor_exchange", n, RoundBound::strict, 2, [&](PartyId i) {
    return std::make_shared<ExchangeProgram>(i, n, ExchangeProgram::Combine::bit_xor, ExchangeProgram::Source::input);
  });
  spec.coin_budget = 0;
  return spec;
}

inline ProtocolSpec or_exchange(std::size_t n) {
  auto spec = detail::build("or_exchange", n, RoundBound::strict, 2, [&](PartyId i) {
    return std::make_shared<ExchangeProgram>(i, n, ExchangeProgram::Combine::bit_or, ExchangeProgram::Source::input);
  });
  spec.coin_budget = 0;
  return spec;
}

inline ProtocolSpec echo_xor(std::size_t n, Round echoes) {
  auto spec = detail::build("echo_xor:" + std::to_string(echoes), n, RoundBound::strict, echoes + 2,
                            [&](PartyId i) { return std::make_shared<EchoXorProgram>(i, n, echoes); });
  spec.coin_budget = 0;
  return spec;
}

inline ProtocolSpec fair_coin(std::size_t n) {
  auto spec = detail::build("fair_coin", n, RoundBound::strict, 2, [&](PartyId i) {
    return std::make_shared<ExchangeProgram>(i, n, ExchangeProgram::Combine::bit_xor, ExchangeProgram::Source::coin);
  });
  spec.coin_budget = 1;
  return spec;
}

inline ProtocolSpec geom_halt(std::size_t n, double p, std::optional<Round> declared_q = {}) {
  if (!(p > 0.0 && p <= 1.0)) throw PreconditionError("geom_halt needs 0 < p <= 1");
  const Round q = declared_q.value_or(static_cast<Round>(std::ceil(1.0 / p)));
  std::ostringstream name;
  name << "geom_halt:" << p << ":" << q;
  return detail::build(name.str(), n, RoundBound::expected, q,
                       [&](PartyId i) { return std::make_shared<GeomHaltProgram>(i, n, p); });
}

/// Per-round halting probability making Pr[halt within m rounds] = target.
inline double geom_halt_rate_for(Round m, double target) { return 1.0 - std::pow(1.0 - target, 1.0 / m); }

inline std::vector<std::string> protocol_names() {
  return {"const:c", "xor_exchange", "or_exchange", "echo_xor:e", "fair_coin", "geom_halt:p[:q]"};
}

/// Parses a selector such as "echo_xor:2" or "geom_halt:0.5".
inline ProtocolSpec make_protocol(std::string_view selector, std::size_t n) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : selector) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  const auto& name = parts[0];
  auto arg = [&](std::size_t i) -> const std::string& {
    if (parts.size() <= i) throw PreconditionError("protocol '" + name + "' needs a parameter");
    return parts[i];
  };
  try {
    if (name == "const") return const_protocol(n, static_cast<std::uint8_t>(std::stoul(arg(1))));
    if (name == "xor_exchange") return xor_exchange(n);
    if (name == "or_exchange") return or_exchange(n);
    if (name == "echo_xor") return echo_xor(n, static_cast<Round>(std::stoul(arg(1))));
    if (name == "fair_coin") return fair_coin(n);
    if (name == "geom_halt") {
      std::optional<Round> q;
      if (parts.size() > 2) q = static_cast<Round>(std::stoul(parts[2]));
      return geom_halt(n, std::stod(arg(1)), q);
    }
  } catch (const std::logic_error&) {
    throw PreconditionError("bad protocol parameter in '" + std::string(selector) + "'");
  }
  throw PreconditionError("unknown protocol '" + name + "'");
}

}  // namespace ringbreak::zoo
