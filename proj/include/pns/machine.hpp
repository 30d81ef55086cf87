#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pns/cipher.hpp"
#include "pns/config.hpp"
#include "pns/image.hpp"
#include "pns/isa.hpp"
#include "pns/phantom.hpp"
#include "pns/uarch.hpp"

namespace pns {

enum class ExceptionKind { TrapExecuted, DecodeFault, FetchFault, MemFault, SdsUnderflow };
enum class Termination { Running, Halt, Exception, Budget };

const char* exception_name(ExceptionKind k);
const char* termination_name(Termination t);

struct MachineException {
  ExceptionKind kind;
  ExtendedPC at;
};

struct CycleCounters {
  uint64_t cycles = 0;
  uint64_t committed = 0;
  uint64_t btb_hits = 0, btb_misses = 0;
  uint64_t bdb_mispredicts = 0;
  uint64_t ras_mispredicts = 0;
  uint64_t icache_hits = 0, icache_misses = 0;
  uint64_t itlb_hits = 0, itlb_misses = 0;
  uint64_t traps_executed = 0, traps_skipped = 0;
  uint64_t encp_count = 0, decp_count = 0;
  uint64_t sds_spills = 0, sds_refills = 0;
  std::array<uint64_t, 5> exceptions{};  // by ExceptionKind
};

struct RunResult {
  Termination termination = Termination::Running;
  std::optional<MachineException> exception;
  std::vector<uint32_t> out;
  uint64_t digest = 0;
  CycleCounters counters;

  std::string to_json() const;
};

struct MemRegion {
  uint32_t base = 0;
  uint32_t size = 0;
  bool writable = false;
  std::vector<uint8_t> bytes;

  bool contains(uint32_t addr, uint32_t len) const {
    return addr >= base && len <= size && addr - base <= size - len;
  }
};

// Hardware stack of phantom indices. Overflow spills the full frame
// (cipher-encrypted, counter mode) to a store outside the adversary-readable
// space; underflow with spilled frames pages the newest one back in.
struct SecretDomainStack {
  std::vector<uint8_t> entries;
  size_t top = 0;
  struct Frame {
    uint64_t seq;
    std::vector<uint32_t> words;
  };
  std::vector<Frame> spill_store;
  uint64_t next_seq = 0;

  size_t capacity() const { return entries.size(); }
  size_t logical_depth() const { return top + spill_store.size() * capacity(); }
};

class Machine {
 public:
  /// reset: validates flag/image consistency (ConfigError), draws p0 and the
  /// pointer-encryption key, maps sections plus a fresh stack region.
  Machine(const ProgramImage& image, const SimConfig& cfg);

  void step();
  RunResult run(uint64_t max_cycles = 0);  // 0 = config budget
  RunResult result() const;

  /// Steps until archetype(pc) == va (returns true) or the machine stops /
  /// exceeds the cycle budget (returns false). The instruction at va has not
  /// executed yet when this returns true.
  bool run_until(uint32_t va, uint64_t max_cycles = 0);

  bool running() const { return term_ == Termination::Running; }
  Termination termination() const { return term_; }
  const std::optional<MachineException>& exception() const { return exc_; }

  ExtendedPC pc() const { return pc_; }
  uint32_t current_va() const;  // archetype(pc)
  uint32_t reg(unsigned i) const { return regs_[i]; }
  void set_reg(unsigned i, uint32_t v) { regs_[i] = v; }
  void set_pc(ExtendedPC epc) { pc_ = epc; }
  const std::array<uint32_t, 16>& regs() const { return regs_; }
  const std::vector<uint32_t>& out_stream() const { return out_; }
  CycleCounters counters() const;  // with structure hit/miss counts folded in
  const SimConfig& config() const { return cfg_; }

  uint64_t digest() const;  // FNV-1a 64 over regs then image rw sections

  // secret domain stack (harness/test introspection; not adversary-reachable)
  size_t sds_depth() const { return sds_.logical_depth(); }
  uint8_t sds_peek_from_top(size_t i) const;
  void sds_push_for_setup(uint8_t p);

  // context save/restore (setjmp/longjmp analog)
  void save_context(uint32_t buffer_va);
  void restore_context(uint32_t buffer_va);

  // adversary primitives: read anywhere mapped, write rw only
  bool adv_read(uint32_t addr, uint32_t len, uint8_t* out) const;
  bool adv_write(uint32_t addr, const uint8_t* data, uint32_t len);

  // uarch introspection
  Btb& btb() { return btb_; }
  ICache& icache() { return icache_; }
  Itlb& itlb() { return itlb_; }
  const Bdb& bdb() const { return bdb_; }

  const std::vector<uint32_t>& committed_va_trace() const { return va_trace_; }
  const std::vector<ExtendedPC>& executed_epc_trace() const { return epc_trace_; }

  static constexpr uint32_t kStackBase = 0xFFFF0000;
  static constexpr uint32_t kStackSize = 0x2000;
  static constexpr uint32_t kStackTop = kStackBase + kStackSize;

 private:
  void fault(ExceptionKind kind);
  const MemRegion* region_at(uint32_t addr, uint32_t len) const;
  MemRegion* region_at(uint32_t addr, uint32_t len);
  bool read_word(uint32_t addr, uint32_t& out) const;   // mapped + aligned
  bool write_word(uint32_t addr, uint32_t v);           // rw + aligned
  uint32_t load_word(const MemRegion& r, uint32_t addr) const;

  void sds_push(uint8_t p);
  bool sds_pop(uint8_t& p);

  void sequential_advance(uint32_t cur_va);
  void control_flow(const Instruction& insn, uint32_t va);
  uint64_t structure_key(bool remap, uint32_t va) const;

  SimConfig cfg_;
  PhantomConfig eff_;  // phantom config with effective n
  const ProgramImage* image_;

  std::array<uint32_t, 16> regs_{};
  ExtendedPC pc_{};
  std::vector<MemRegion> mem_;
  SecretDomainStack sds_;
  PtrEncKey key_;
  SelectorRng rng_;
  std::vector<uint32_t> out_;
  CycleCounters counters_;
  Termination term_ = Termination::Running;
  std::optional<MachineException> exc_;

  Btb btb_;
  Bdb bdb_;
  Ras ras_;
  ICache icache_;
  Itlb itlb_;

  std::vector<uint32_t> va_trace_;
  std::vector<ExtendedPC> epc_trace_;
};

}  // namespace pns
