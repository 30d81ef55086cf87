#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pns/errors.hpp"
#include "pns/isa.hpp"
#include "pns/phantom.hpp"

namespace pns {

struct Section {
  std::string name;
  uint32_t base = 0;
  bool writable = false;  // perm: rw when true, rx when false
  std::vector<uint32_t> words;

  uint32_t size_bytes() const { return static_cast<uint32_t>(words.size()) * 4; }
  uint32_t end() const { return base + size_bytes(); }
  bool contains(uint32_t va) const { return va >= base && va < end(); }
};

// Loadable artifact. rx sections are immutable after load (W^X). When
// trap_mode is set, every trap location holds a TRAP word sitting 4 bytes
// before a basic-block entry.
struct ProgramImage {
  uint32_t entry = 0;
  bool trap_mode = false;
  std::vector<Section> sections;
  std::map<std::string, uint32_t> symbols;
  std::vector<uint32_t> bbl_starts;      // sorted, post-rewrite entry points
  std::vector<uint32_t> trap_locations;  // sorted
  std::vector<uint32_t> code_refs;       // data words holding text addresses

  const Section* section_at(uint32_t va) const;
  std::optional<uint32_t> word_at(uint32_t va) const;
  bool is_trap_location(uint32_t va) const;
  uint32_t symbol(const std::string& name) const;  // throws HarnessError

  /// Checks all image invariants; throws LoadError naming the failed one.
  void validate(const PhantomConfig& cfg = {}) const;
};

struct BasicBlock {
  uint32_t entry = 0;  // first executable (post-trap) instruction
  uint32_t end = 0;    // last instruction of the block
  std::optional<uint32_t> fallthrough;
};

/// Two-pass assembler for the documented directive set (.text, .data,
/// .org ADDR, .word V, labels). Throws AssemblyError with line numbers.
ProgramImage assemble(const std::string& source);

/// Leaders: section start, entry, every static branch/call target, and every
/// instruction following a control-flow instruction. Throws AnalysisError.
std::vector<BasicBlock> identify_bbls(const ProgramImage& image);

/// Inserts one TRAP word before each basic-block entry and re-lays-out all
/// code addresses, branch immediates, symbols, and tracked data references so
/// legitimate edges target post-trap entries. Throws RewriteError.
ProgramImage insert_traps(const ProgramImage& image);

ProgramImage load_image(const std::string& json_text, const PhantomConfig& cfg = {});
std::string save_image(const ProgramImage& image);

}  // namespace pns
