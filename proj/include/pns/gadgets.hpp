#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "pns/image.hpp"
#include "pns/isa.hpp"

namespace pns {

// Instruction suffix ending in ret/jr/callr with no intervening control flow.
struct Gadget {
  uint32_t start = 0;
  std::vector<Instruction> instructions;
};

/// Every 4-aligned rx start whose forward decode reaches a terminator within
/// max_len instructions. Undecodable starts are skipped.
std::vector<Gadget> scan_gadgets(const ProgramImage& image, unsigned max_len = 5);

struct ShiftDecode {
  bool decodable = false;  // false: decode error or left the rx sections
  std::vector<Instruction> seq;
};

/// Decode from gadget.start + k*delta (k != 0) up to the first terminator,
/// other control flow, or a 16-instruction cap.
ShiftDecode shift_decode(const Gadget& gadget, int k, uint32_t delta, const ProgramImage& image);

/// Concrete-testing equivalence: executes both start addresses from R
/// identical random machine states (registers, valid stack pointer, scratch
/// memory) in a de-trapped n=0 sandbox and compares final registers, memory,
/// out stream, and the terminating transfer's kind and target. Any fault,
/// halt, or missing terminator in g2 means not equivalent.
bool semantically_equivalent(uint32_t g1_start, uint32_t g2_start, const ProgramImage& image,
                             unsigned states = 64, uint64_t seed = 0x5EED5EED);

struct ChainSurvival {
  bool survives_minus = false;  // k = -1
  bool survives_plus = false;   // k = +1
  bool survives() const { return survives_minus && survives_plus; }
};

struct SurvivalReport {
  size_t gadget_count = 0;
  size_t chains_before = 0;
  size_t chains_after = 0;
  std::vector<ChainSurvival> per_chain;
  std::map<uint32_t, std::pair<bool, bool>> per_gadget;  // start -> (k=-1, k=+1)
};

/// A chain survives offset k iff every gadget's k-shifted decode is
/// semantically equivalent to the original; survival requires both offsets.
/// Throws UnknownGadgetError when a chain references a VA not in the scan.
SurvivalReport chain_survival(const std::vector<std::vector<uint32_t>>& chains, uint32_t delta,
                              const ProgramImage& image, unsigned max_len = 5);

}  // namespace pns
