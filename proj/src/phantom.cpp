#include "pns/phantom.hpp"

#include <cmath>

namespace pns {

ExtendedPC phantom_name(uint32_t va, uint8_t p, const PhantomConfig& cfg) {
  uint64_t shift = static_cast<uint64_t>(p) * cfg.delta;
  if (shift > va) throw RangeError("phantom_name underflow");
  return {p, static_cast<uint32_t>(va - shift)};
}

uint32_t archetype(const ExtendedPC& epc, const PhantomConfig& cfg) {
  uint64_t va = static_cast<uint64_t>(epc.addr) + static_cast<uint64_t>(epc.p) * cfg.delta;
  if (va > 0xFFFFFFFFull) throw RangeError("archetype overflow");
  return static_cast<uint32_t>(va);
}

ExtendedPC selector_next(const ExtendedPC& target, SelectorRng& rng, const PhantomConfig& cfg) {
  uint8_t p_next = rng.draw_index(cfg.n);
  int64_t adjust = (static_cast<int64_t>(p_next) - target.p) * static_cast<int64_t>(cfg.delta);
  int64_t addr = static_cast<int64_t>(target.addr) - adjust;
  if (addr < 0 || addr > 0xFFFFFFFFll) throw RangeError("selector_next out of range");
  return {p_next, static_cast<uint32_t>(addr)};
}

double analytic_success_probability(double phantoms, double chain_length) {
  return std::pow(phantoms, -chain_length);
}

}  // namespace pns
