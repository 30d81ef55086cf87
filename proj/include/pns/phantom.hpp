#pragma once

#include <cstdint>

#include "pns/errors.hpp"

namespace pns {

// N = 2^n phantoms; phantom p names instruction va as (va - p*delta).
// delta de-overlaps the phantom copies; the conceptual phantom offset
// (1 << 32) is never materialized -- the index lives in separate bits.
struct PhantomConfig {
  unsigned n = 8;      // 0..8; n = 0 degenerates to a standard machine
  uint32_t delta = 4;  // bytes; machine/loader require delta % 4 == 0

  uint32_t phantom_count() const { return 1u << n; }
  uint32_t max_shift() const { return (phantom_count() - 1) * delta; }
};

struct ExtendedPC {
  uint8_t p = 0;
  uint32_t addr = 0;
  bool operator==(const ExtendedPC&) const = default;
};

// splitmix64; stands in for the metastable flip-flops so runs are seeded
// and reproducible.
class SelectorRng {
 public:
  explicit SelectorRng(uint64_t seed) : state_(seed) {}

  static SelectorRng forced(uint8_t p) {
    SelectorRng r(0);
    r.forced_ = true;
    r.forced_value_ = p;
    return r;
  }

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Low n uniform bits; n = 0 returns 0 without consuming state.
  uint8_t draw_index(unsigned n) {
    if (n == 0) return 0;
    uint8_t mask = static_cast<uint8_t>((1u << n) - 1);
    if (forced_) return forced_value_ & mask;
    return static_cast<uint8_t>(next()) & mask;
  }

  bool is_forced() const { return forced_; }

 private:
  uint64_t state_;
  bool forced_ = false;
  uint8_t forced_value_ = 0;
};

/// f: (va, p) -> extended pc {p, va - p*delta}. Throws RangeError on underflow.
ExtendedPC phantom_name(uint32_t va, uint8_t p, const PhantomConfig& cfg);

/// f^-1: extended pc -> virtual address (addr + p*delta). Throws RangeError on
/// 32-bit overflow.
uint32_t archetype(const ExtendedPC& epc, const PhantomConfig& cfg);

/// Draws p_next and rebases the target name:
/// {p_next, target.addr - (p_next - target.p) * delta}. Archetype-preserving.
ExtendedPC selector_next(const ExtendedPC& target, SelectorRng& rng, const PhantomConfig& cfg);

/// Attacker success probability N^-P for a P-gadget chain against N phantoms.
double analytic_success_probability(double phantoms, double chain_length);

}  // namespace pns
