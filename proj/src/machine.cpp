#include "pns/machine.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "json.hpp"

namespace pns {

namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

void fnv_byte(uint64_t& h, uint8_t b) {
  h ^= b;
  h *= kFnvPrime;
}

void fnv_word(uint64_t& h, uint32_t w) {
  fnv_byte(h, w & 0xFF);
  fnv_byte(h, (w >> 8) & 0xFF);
  fnv_byte(h, (w >> 16) & 0xFF);
  fnv_byte(h, (w >> 24) & 0xFF);
}

constexpr uint32_t kCtxTweak = 0x9E3779B9u;

}  // namespace

const char* exception_name(ExceptionKind k) {
  switch (k) {
    case ExceptionKind::TrapExecuted: return "trap-executed";
    case ExceptionKind::DecodeFault: return "decode-fault";
    case ExceptionKind::FetchFault: return "fetch-fault";
    case ExceptionKind::MemFault: return "mem-fault";
    case ExceptionKind::SdsUnderflow: return "sds-underflow";
  }
  return "?";
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Running: return "running";
    case Termination::Halt: return "halt";
    case Termination::Exception: return "exception";
    case Termination::Budget: return "budget";
  }
  return "?";
}

Machine::Machine(const ProgramImage& image, const SimConfig& cfg)
    : cfg_(cfg),
      image_(&image),
      rng_(cfg.forced_domain ? SelectorRng::forced(*cfg.forced_domain) : SelectorRng(cfg.seed)),
      btb_(cfg.uarch.btb_entries),
      bdb_(cfg.uarch.bdb_entries),
      ras_(cfg.uarch.ras_entries),
      icache_(cfg.uarch.icache_sets, cfg.uarch.icache_ways, cfg.uarch.icache_line_bytes),
      itlb_(cfg.uarch.itlb_entries) {
  if (cfg_.phantom.n > 8) throw ConfigError("phantom.n must be 0..8");
  if (cfg_.phantom.delta == 0 || cfg_.phantom.delta % 4 != 0) {
    throw ConfigError("delta must be a positive multiple of 4");
  }
  if (cfg_.uarch.sds_capacity == 0 || cfg_.uarch.sds_capacity % 4 != 0) {
    throw ConfigError("sds_capacity must be a positive multiple of 4");
  }
  if (cfg_.features.traps != image.trap_mode) {
    throw ConfigError(image.trap_mode ? "trap image requires traps_enabled"
                                      : "traps_enabled requires a trap-rewritten image");
  }

  eff_ = PhantomConfig{cfg_.effective_n(), cfg_.phantom.delta};

  for (const auto& s : image.sections) {
    MemRegion r;
    r.base = s.base;
    r.size = s.size_bytes();
    r.writable = s.writable;
    r.bytes.resize(r.size);
    for (size_t i = 0; i < s.words.size(); ++i) {
      uint32_t w = s.words[i];
      r.bytes[i * 4 + 0] = w & 0xFF;
      r.bytes[i * 4 + 1] = (w >> 8) & 0xFF;
      r.bytes[i * 4 + 2] = (w >> 16) & 0xFF;
      r.bytes[i * 4 + 3] = (w >> 24) & 0xFF;
    }
    if (r.base < kStackTop && kStackBase < r.base + r.size) {
      throw ConfigError("section overlaps the machine stack region");
    }
    // every phantom name of rx code must stay representable under this config
    if (!r.writable && r.size > 0) {
      if (r.base < eff_.max_shift()) throw ConfigError("rx section below the phantom range");
    }
    mem_.push_back(std::move(r));
  }
  mem_.push_back(MemRegion{kStackBase, kStackSize, true, std::vector<uint8_t>(kStackSize, 0)});

  sds_.entries.assign(cfg_.uarch.sds_capacity, 0);

  uint8_t p0 = cfg_.features.pns ? rng_.draw_index(eff_.n) : 0;
  pc_ = phantom_name(image.entry, p0, eff_);
  for (auto& k : key_.rounds) k = static_cast<uint16_t>(rng_.next());
  regs_[13] = kStackTop;
  if (cfg_.trace_uarch) {
    btb_.record_touched = icache_.record_touched = itlb_.record_touched = true;
  }
}

uint32_t Machine::current_va() const { return archetype(pc_, eff_); }

void Machine::fault(ExceptionKind kind) {
  term_ = Termination::Exception;
  exc_ = MachineException{kind, pc_};
  ++counters_.exceptions[static_cast<size_t>(kind)];
}

const MemRegion* Machine::region_at(uint32_t addr, uint32_t len) const {
  for (const auto& r : mem_) {
    if (r.contains(addr, len)) return &r;
  }
  return nullptr;
}

MemRegion* Machine::region_at(uint32_t addr, uint32_t len) {
  for (auto& r : mem_) {
    if (r.contains(addr, len)) return &r;
  }
  return nullptr;
}

uint32_t Machine::load_word(const MemRegion& r, uint32_t addr) const {
  size_t off = addr - r.base;
  return static_cast<uint32_t>(r.bytes[off]) | (static_cast<uint32_t>(r.bytes[off + 1]) << 8) |
         (static_cast<uint32_t>(r.bytes[off + 2]) << 16) |
         (static_cast<uint32_t>(r.bytes[off + 3]) << 24);
}

bool Machine::read_word(uint32_t addr, uint32_t& out) const {
  if (addr % 4 != 0) return false;
  const MemRegion* r = region_at(addr, 4);
  if (!r) return false;
  out = load_word(*r, addr);
  return true;
}

bool Machine::write_word(uint32_t addr, uint32_t v) {
  if (addr % 4 != 0) return false;
  MemRegion* r = region_at(addr, 4);
  if (!r || !r->writable) return false;
  size_t off = addr - r->base;
  r->bytes[off] = v & 0xFF;
  r->bytes[off + 1] = (v >> 8) & 0xFF;
  r->bytes[off + 2] = (v >> 16) & 0xFF;
  r->bytes[off + 3] = (v >> 24) & 0xFF;
  return true;
}

void Machine::sds_push(uint8_t p) {
  if (sds_.top == sds_.capacity()) {
    SecretDomainStack::Frame f;
    f.seq = sds_.next_seq++;
    size_t nwords = sds_.capacity() / 4;
    f.words.resize(nwords);
    for (size_t i = 0; i < nwords; ++i) {
      uint32_t pt = static_cast<uint32_t>(sds_.entries[i * 4]) |
                    (static_cast<uint32_t>(sds_.entries[i * 4 + 1]) << 8) |
                    (static_cast<uint32_t>(sds_.entries[i * 4 + 2]) << 16) |
                    (static_cast<uint32_t>(sds_.entries[i * 4 + 3]) << 24);
      f.words[i] = pt ^ cipher_encrypt(static_cast<uint32_t>(f.seq * nwords + i), key_);
    }
    sds_.spill_store.push_back(std::move(f));
    sds_.top = 0;
    ++counters_.sds_spills;
  }
  sds_.entries[sds_.top++] = p;
}

bool Machine::sds_pop(uint8_t& p) {
  if (sds_.top == 0) {
    if (sds_.spill_store.empty()) return false;
    SecretDomainStack::Frame f = std::move(sds_.spill_store.back());
    sds_.spill_store.pop_back();
    size_t nwords = sds_.capacity() / 4;
    for (size_t i = 0; i < nwords; ++i) {
      uint32_t pt = f.words[i] ^ cipher_encrypt(static_cast<uint32_t>(f.seq * nwords + i), key_);
      sds_.entries[i * 4] = pt & 0xFF;
      sds_.entries[i * 4 + 1] = (pt >> 8) & 0xFF;
      sds_.entries[i * 4 + 2] = (pt >> 16) & 0xFF;
      sds_.entries[i * 4 + 3] = (pt >> 24) & 0xFF;
    }
    sds_.top = sds_.capacity();
    ++counters_.sds_refills;
  }
  p = sds_.entries[--sds_.top];
  return true;
}

uint8_t Machine::sds_peek_from_top(size_t i) const {
  if (i < sds_.top) return sds_.entries[sds_.top - 1 - i];
  i -= sds_.top;
  size_t nwords = sds_.capacity() / 4;
  for (auto it = sds_.spill_store.rbegin(); it != sds_.spill_store.rend(); ++it) {
    if (i < sds_.capacity()) {
      size_t idx = sds_.capacity() - 1 - i;
      uint32_t pt =
          it->words[idx / 4] ^ cipher_encrypt(static_cast<uint32_t>(it->seq * nwords + idx / 4), key_);
      return static_cast<uint8_t>(pt >> (8 * (idx % 4)));
    }
    i -= sds_.capacity();
  }
  throw HarnessError("sds peek beyond logical depth");
}

void Machine::sds_push_for_setup(uint8_t p) { sds_push(p); }

uint64_t Machine::structure_key(bool remap, uint32_t va) const {
  if (remap) return va;
  return (static_cast<uint64_t>(pc_.p) << 32) | pc_.addr;
}

void Machine::sequential_advance(uint32_t cur_va) {
  pc_.addr += 4;
  // fall-through trap skip: never applies to transfer targets
  if (cfg_.features.traps && image_->is_trap_location(cur_va + 4)) {
    pc_.addr += 4;
    ++counters_.traps_skipped;
  }
}

void Machine::control_flow(const Instruction& insn, uint32_t va) {
  const Op op = insn.op;

  if (op == Op::Ret) {
    uint32_t v;
    if (!read_word(regs_[13], v)) {
      fault(ExceptionKind::MemFault);
      return;
    }
    regs_[13] += 4;
    uint8_t p;
    if (!sds_pop(p)) {
      fault(ExceptionKind::SdsUnderflow);
      return;
    }
    ExtendedPC resolved{p, v};
    auto predicted = ras_.pop();
    if (!(predicted && *predicted == resolved)) {
      ++counters_.ras_mispredicts;
      counters_.cycles += cfg_.uarch.mispredict_penalty;
    }
    ++counters_.committed;
    pc_ = resolved;
    return;
  }

  bool is_cond = op == Op::Beq || op == Op::Bne;
  bool taken = true;
  uint32_t target = 0;
  switch (op) {
    case Op::Jmp:
    case Op::Call:
      target = va + 4 + static_cast<uint32_t>(insn.imm) * 4;
      break;
    case Op::Beq:
      taken = regs_[insn.ra] == regs_[insn.rb];
      target = va + 4 + static_cast<uint32_t>(insn.imm) * 4;
      break;
    case Op::Bne:
      taken = regs_[insn.ra] != regs_[insn.rb];
      target = va + 4 + static_cast<uint32_t>(insn.imm) * 4;
      break;
    case Op::Jr:
    case Op::Callr:
      target = regs_[insn.rd];
      break;
    default:
      break;
  }

  uint64_t key = structure_key(cfg_.features.remap.btb, va);
  BtbLookup lookup = btb_.access(key);
  bool dir_pred_taken = is_cond ? bdb_.predict_taken(va) : true;

  if (is_cond && !taken) {
    // fall through in the current domain; direction predictor settles the cost
    if (dir_pred_taken) {
      ++counters_.bdb_mispredicts;
      counters_.cycles += cfg_.uarch.mispredict_penalty;
    }
    bdb_.update(va, false);
    ++counters_.committed;
    sequential_advance(va);
    return;
  }

  // A functional hit supplies the pre-randomized target installed at the last
  // commit; the prediction then equals the actual next pc by construction.
  bool functional_hit = lookup.hit;
  if (functional_hit) {
    try {
      functional_hit = archetype(lookup.predicted, eff_) == target;
    } catch (const RangeError&) {
      functional_hit = false;
    }
  }
  bool mispredict = !functional_hit || (is_cond && !dir_pred_taken);

  ExtendedPC next;
  if (!mispredict) {
    next = lookup.predicted;
  } else {
    ExtendedPC named;
    try {
      named = phantom_name(target, pc_.p, eff_);
      next = selector_next(named, rng_, eff_);
    } catch (const RangeError&) {
      fault(ExceptionKind::FetchFault);  // misdirected transfer out of range
      return;
    }
    if (is_cond && !dir_pred_taken) ++counters_.bdb_mispredicts;
    counters_.cycles += cfg_.uarch.mispredict_penalty;
  }
  if (is_cond) bdb_.update(va, true);

  // commit-stage selector: install a fresh draw for the next execution
  try {
    btb_.update(key, selector_next(next, rng_, eff_));
  } catch (const RangeError&) {
    // target at the edge of the representable range; leave the entry alone
  }

  if (op == Op::Call || op == Op::Callr) {
    uint32_t ret_va = va + 4;
    if (cfg_.features.traps && image_->is_trap_location(ret_va)) ret_va += 4;
    uint32_t stored = ret_va - static_cast<uint32_t>(pc_.p) * eff_.delta;
    regs_[13] -= 4;
    if (!write_word(regs_[13], stored)) {
      fault(ExceptionKind::MemFault);
      return;
    }
    sds_push(pc_.p);
    ras_.push({pc_.p, stored});
  }

  ++counters_.committed;
  pc_ = next;
}

void Machine::step() {
  if (term_ != Termination::Running) return;

  uint32_t va;
  try {
    va = archetype(pc_, eff_);
  } catch (const RangeError&) {
    fault(ExceptionKind::FetchFault);
    return;
  }

  if (cfg_.ctx_save_at && va == *cfg_.ctx_save_at) {
    save_context(cfg_.ctx_buffer);
    if (term_ != Termination::Running) return;
  }
  if (cfg_.ctx_restore_at && va == *cfg_.ctx_restore_at) {
    restore_context(cfg_.ctx_buffer);
    if (term_ != Termination::Running) return;
  }

  const MemRegion* r = region_at(va, 4);
  if (!r || r->writable || va % 4 != 0) {
    fault(ExceptionKind::FetchFault);
    return;
  }

  counters_.cycles += 1 + cfg_.uarch.fetch_extra_cycles + cfg_.uarch.icache_extra_cycles;
  if (!itlb_.access(structure_key(cfg_.features.remap.itlb, va))) {
    counters_.cycles += cfg_.uarch.itlb_miss_penalty;
  }
  if (!icache_.access(structure_key(cfg_.features.remap.icache, va))) {
    counters_.cycles += cfg_.uarch.icache_miss_penalty;
  }

  uint32_t word = load_word(*r, va);
  auto decoded = decode(word);
  if (!decoded) {
    fault(ExceptionKind::DecodeFault);
    return;
  }
  const Instruction& i = *decoded;

  if (cfg_.record_traces) {
    va_trace_.push_back(va);
    epc_trace_.push_back(pc_);
  }

  switch (i.op) {
    case Op::Nop:
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Halt:
      ++counters_.committed;
      term_ = Termination::Halt;
      break;
    case Op::Trap:
      ++counters_.committed;
      ++counters_.traps_executed;
      fault(ExceptionKind::TrapExecuted);
      break;
    case Op::Add:
      regs_[i.rd] = regs_[i.ra] + regs_[i.rb];
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Sub:
      regs_[i.rd] = regs_[i.ra] - regs_[i.rb];
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Xor:
      regs_[i.rd] = regs_[i.ra] ^ regs_[i.rb];
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::And:
      regs_[i.rd] = regs_[i.ra] & regs_[i.rb];
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Or:
      regs_[i.rd] = regs_[i.ra] | regs_[i.rb];
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Shl:
      regs_[i.rd] = regs_[i.ra] << (regs_[i.rb] & 31);
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Shr:
      regs_[i.rd] = regs_[i.ra] >> (regs_[i.rb] & 31);
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Mov:
      regs_[i.rd] = regs_[i.ra];
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Ldi:
      regs_[i.rd] = static_cast<uint32_t>(i.imm);
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Lui:
      regs_[i.rd] = (regs_[i.rd] & 0xFFFF) | (static_cast<uint32_t>(i.imm) << 16);
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Ld: {
      uint32_t addr = regs_[i.ra] + static_cast<uint32_t>(i.imm);
      uint32_t v;
      if (!read_word(addr, v)) {
        fault(ExceptionKind::MemFault);
        return;
      }
      regs_[i.rd] = v;
      ++counters_.committed;
      sequential_advance(va);
      break;
    }
    case Op::St: {
      uint32_t addr = regs_[i.ra] + static_cast<uint32_t>(i.imm);
      if (!write_word(addr, regs_[i.rd])) {
        fault(ExceptionKind::MemFault);
        return;
      }
      ++counters_.committed;
      sequential_advance(va);
      break;
    }
    case Op::Out:
      out_.push_back(regs_[i.rd]);
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Encp:
    case Op::Decp:
      if (cfg_.features.ptrenc) {
        regs_[i.rd] = i.op == Op::Encp ? cipher_encrypt(regs_[i.rd], key_)
                                       : cipher_decrypt(regs_[i.rd], key_);
        counters_.cycles += cfg_.uarch.encp_cycles;
        ++(i.op == Op::Encp ? counters_.encp_count : counters_.decp_count);
      }
      ++counters_.committed;
      sequential_advance(va);
      break;
    case Op::Jmp:
    case Op::Jr:
    case Op::Beq:
    case Op::Bne:
    case Op::Call:
    case Op::Callr:
    case Op::Ret:
      control_flow(i, va);
      break;
  }
}

RunResult Machine::run(uint64_t max_cycles) {
  uint64_t budget = max_cycles ? max_cycles : cfg_.max_cycles;
  while (term_ == Termination::Running && counters_.cycles < budget) step();
  if (term_ == Termination::Running) term_ = Termination::Budget;
  return result();
}

bool Machine::run_until(uint32_t va, uint64_t max_cycles) {
  uint64_t budget = max_cycles ? max_cycles : cfg_.max_cycles;
  while (term_ == Termination::Running && counters_.cycles < budget) {
    uint32_t cur;
    try {
      cur = archetype(pc_, eff_);
    } catch (const RangeError&) {
      return false;
    }
    if (cur == va) return true;
    step();
  }
  return false;
}

CycleCounters Machine::counters() const {
  CycleCounters c = counters_;
  c.btb_hits = btb_.hits;
  c.btb_misses = btb_.lookups - btb_.hits;
  c.icache_hits = icache_.hits;
  c.icache_misses = icache_.misses;
  c.itlb_hits = itlb_.hits;
  c.itlb_misses = itlb_.misses;
  return c;
}

uint64_t Machine::digest() const {
  uint64_t h = kFnvOffset;
  for (uint32_t r : regs_) fnv_word(h, r);
  // image-declared rw sections only, ascending base; the reset-created stack
  // region carries seed-dependent return encodings and is excluded
  std::vector<const MemRegion*> rw;
  for (const auto& s : image_->sections) {
    if (!s.writable) continue;
    const MemRegion* r = region_at(s.base, 4);
    if (r && r->base == s.base) rw.push_back(r);
  }
  std::sort(rw.begin(), rw.end(),
            [](const MemRegion* a, const MemRegion* b) { return a->base < b->base; });
  for (const MemRegion* r : rw) {
    for (uint8_t b : r->bytes) fnv_byte(h, b);
  }
  return h;
}

RunResult Machine::result() const {
  RunResult res;
  res.termination = term_;
  res.exception = exc_;
  res.out = out_;
  res.digest = digest();
  res.counters = counters();
  return res;
}

void Machine::save_context(uint32_t buffer_va) {
  std::array<uint32_t, 18> plain{};
  for (int i = 0; i < 16; ++i) plain[i] = regs_[i];
  plain[16] = static_cast<uint32_t>(sds_.logical_depth());
  uint64_t h = kFnvOffset;
  for (int i = 0; i < 17; ++i) fnv_word(h, plain[i]);
  plain[17] = static_cast<uint32_t>(h);
  for (uint32_t i = 0; i < 18; ++i) {
    uint32_t ct = cipher_encrypt(plain[i] ^ (kCtxTweak * i), key_);
    if (!write_word(buffer_va + 4 * i, ct)) {
      fault(ExceptionKind::MemFault);
      return;
    }
  }
}

void Machine::restore_context(uint32_t buffer_va) {
  std::array<uint32_t, 18> plain{};
  for (uint32_t i = 0; i < 18; ++i) {
    uint32_t ct;
    if (!read_word(buffer_va + 4 * i, ct)) {
      fault(ExceptionKind::MemFault);
      return;
    }
    plain[i] = cipher_decrypt(ct, key_) ^ (kCtxTweak * i);
  }
  uint64_t h = kFnvOffset;
  for (int i = 0; i < 17; ++i) fnv_word(h, plain[i]);
  if (plain[17] != static_cast<uint32_t>(h)) {
    fault(ExceptionKind::MemFault);  // tampered or stale buffer
    return;
  }
  size_t saved_depth = plain[16];
  if (saved_depth > sds_.logical_depth()) {
    fault(ExceptionKind::MemFault);
    return;
  }
  while (sds_.logical_depth() > saved_depth) {
    uint8_t dropped;
    sds_pop(dropped);
  }
  for (int i = 0; i < 16; ++i) regs_[i] = plain[i];
}

bool Machine::adv_read(uint32_t addr, uint32_t len, uint8_t* out) const {
  const MemRegion* r = region_at(addr, len);
  if (!r) return false;
  std::memcpy(out, r->bytes.data() + (addr - r->base), len);
  return true;
}

bool Machine::adv_write(uint32_t addr, const uint8_t* data, uint32_t len) {
  MemRegion* r = region_at(addr, len);
  if (!r || !r->writable) return false;  // W^X: rw only
  std::memcpy(r->bytes.data() + (addr - r->base), data, len);
  return true;
}

std::string RunResult::to_json() const {
  nlohmann::ordered_json j;
  j["termination"] = termination_name(termination);
  j["cycles"] = counters.cycles;
  j["committed"] = counters.committed;
  auto out_arr = nlohmann::ordered_json::array();
  char buf[16];
  for (uint32_t v : out) {
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    out_arr.push_back(buf);
  }
  j["out"] = std::move(out_arr);
  char dbuf[24];
  std::snprintf(dbuf, sizeof dbuf, "0x%016llx", static_cast<unsigned long long>(digest));
  j["digest"] = dbuf;
  nlohmann::ordered_json c;
  c["btb_hits"] = counters.btb_hits;
  c["btb_misses"] = counters.btb_misses;
  c["bdb_mispredicts"] = counters.bdb_mispredicts;
  c["ras_mispredicts"] = counters.ras_mispredicts;
  c["icache_hits"] = counters.icache_hits;
  c["icache_misses"] = counters.icache_misses;
  c["itlb_hits"] = counters.itlb_hits;
  c["itlb_misses"] = counters.itlb_misses;
  c["traps_executed"] = counters.traps_executed;
  c["traps_skipped"] = counters.traps_skipped;
  c["encp"] = counters.encp_count;
  c["decp"] = counters.decp_count;
  c["sds_spills"] = counters.sds_spills;
  c["sds_refills"] = counters.sds_refills;
  nlohmann::ordered_json ex = nlohmann::ordered_json::object();
  for (size_t k = 0; k < counters.exceptions.size(); ++k) {
    if (counters.exceptions[k]) {
      ex[exception_name(static_cast<ExceptionKind>(k))] = counters.exceptions[k];
    }
  }
  c["exceptions"] = std::move(ex);
  j["counters"] = std::move(c);
  if (exception) {
    char abuf[16];
    std::snprintf(abuf, sizeof abuf, "0x%08x", exception->at.addr);
    j["exception"] = {{"kind", exception_name(exception->kind)},
                      {"p", exception->at.p},
                      {"addr", abuf}};
  } else {
    j["exception"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace pns
