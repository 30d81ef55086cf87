#include "pns/gadgets.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "pns/machine.hpp"

namespace pns {

namespace {

constexpr uint32_t kScratchBase = 0x00F00000;
constexpr uint32_t kScratchSize = 0x1000;
constexpr uint32_t kScratchSp = kScratchBase + kScratchSize / 2;

// Sandbox: same code bytes, trap skip off (landed-on TRAP words must execute
// and fault), single domain, fixed key.
ProgramImage sandbox_image(const ProgramImage& image) {
  ProgramImage s = image;
  s.trap_mode = false;
  s.trap_locations.clear();
  s.bbl_starts.clear();
  Section scratch{"gadget_scratch", kScratchBase, true,
                  std::vector<uint32_t>(kScratchSize / 4, 0)};
  s.sections.push_back(std::move(scratch));
  return s;
}

struct GadgetOutcome {
  enum class Status { Terminated, Halted, Faulted, NoTerminator } status = Status::Faulted;
  Op term_op = Op::Ret;
  uint32_t target = 0;
  std::array<uint32_t, 16> regs{};
  std::vector<uint32_t> out;
  uint64_t mem_hash = 0;

  bool operator==(const GadgetOutcome&) const = default;
};

uint64_t hash_rw(const Machine& m, const ProgramImage& simg) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix_range = [&](uint32_t base, uint32_t size) {
    std::vector<uint8_t> buf(size);
    if (!m.adv_read(base, size, buf.data())) return;
    for (uint8_t b : buf) {
      h ^= b;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& s : simg.sections) {
    if (s.writable && !s.words.empty()) mix_range(s.base, s.size_bytes());
  }
  mix_range(Machine::kStackBase, Machine::kStackSize);
  return h;
}

GadgetOutcome exec_gadget(const ProgramImage& simg, uint32_t start, uint64_t state_seed) {
  SimConfig cfg;
  cfg.features.pns = false;
  cfg.features.traps = false;
  cfg.features.ptrenc = true;
  cfg.seed = 0xC0DE5EED;
  Machine m(simg, cfg);

  SelectorRng sr(state_seed);
  for (unsigned i = 0; i < 16; ++i) m.set_reg(i, static_cast<uint32_t>(sr.next()) & 0xFF);
  m.set_reg(13, kScratchSp);
  for (unsigned i = 0; i < 32; ++i) {
    uint32_t w = static_cast<uint32_t>(sr.next());
    uint8_t bytes[4] = {static_cast<uint8_t>(w), static_cast<uint8_t>(w >> 8),
                        static_cast<uint8_t>(w >> 16), static_cast<uint8_t>(w >> 24)};
    m.adv_write(kScratchSp + 4 * i, bytes, 4);
  }
  for (unsigned i = 0; i < 32; ++i) m.sds_push_for_setup(0);
  m.set_pc({0, start});

  GadgetOutcome o;
  for (int steps = 0; steps < 32; ++steps) {
    uint32_t va = m.pc().addr;  // n = 0: archetype == addr
    uint8_t wb[4];
    bool is_term = false;
    if (va % 4 == 0 && m.adv_read(va, 4, wb)) {
      uint32_t word = wb[0] | (wb[1] << 8) | (wb[2] << 16) | (uint32_t(wb[3]) << 24);
      auto insn = decode(word);
      if (insn && is_terminator(insn->op)) {
        is_term = true;
        o.term_op = insn->op;
      }
    }
    m.step();
    if (is_term && m.termination() == Termination::Running) {
      o.status = GadgetOutcome::Status::Terminated;
      o.target = m.pc().addr;
      o.regs = m.regs();
      o.out = m.out_stream();
      o.mem_hash = hash_rw(m, simg);
      return o;
    }
    if (m.termination() != Termination::Running) {
      if (m.termination() == Termination::Halt) {
        o.status = GadgetOutcome::Status::Halted;
        o.regs = m.regs();
        o.out = m.out_stream();
        o.mem_hash = hash_rw(m, simg);
      } else {
        o.status = GadgetOutcome::Status::Faulted;
      }
      return o;
    }
  }
  o.status = GadgetOutcome::Status::NoTerminator;
  return o;
}

bool equivalent_on_sandbox(uint32_t g1, uint32_t g2, const ProgramImage& simg, unsigned states,
                           uint64_t seed) {
  if (g1 == g2) return true;
  for (unsigned i = 0; i < states; ++i) {
    uint64_t state_seed = seed + 0x9E3779B97F4A7C15ull * (i + 1);
    GadgetOutcome a = exec_gadget(simg, g1, state_seed);
    GadgetOutcome b = exec_gadget(simg, g2, state_seed);
    if (b.status == GadgetOutcome::Status::Faulted ||
        b.status == GadgetOutcome::Status::NoTerminator) {
      return false;
    }
    if (!(a == b)) return false;
  }
  return true;
}

}  // namespace

std::vector<Gadget> scan_gadgets(const ProgramImage& image, unsigned max_len) {
  std::vector<Gadget> out;
  for (const auto& s : image.sections) {
    if (s.writable) continue;
    for (size_t i = 0; i < s.words.size(); ++i) {
      Gadget g;
      g.start = s.base + static_cast<uint32_t>(i) * 4;
      bool complete = false;
      for (unsigned len = 0; len < max_len && i + len < s.words.size(); ++len) {
        auto insn = decode(s.words[i + len]);
        if (!insn) break;
        if (is_terminator(insn->op)) {
          g.instructions.push_back(*insn);
          complete = true;
          break;
        }
        if (is_control_flow(insn->op)) break;  // no intervening control flow
        g.instructions.push_back(*insn);
      }
      if (complete) out.push_back(std::move(g));
    }
  }
  return out;
}

ShiftDecode shift_decode(const Gadget& gadget, int k, uint32_t delta, const ProgramImage& image) {
  ShiftDecode sd;
  int64_t start = static_cast<int64_t>(gadget.start) + static_cast<int64_t>(k) * delta;
  if (start < 0 || start > 0xFFFFFFFFll) return sd;
  uint32_t va = static_cast<uint32_t>(start);
  for (unsigned len = 0; len < 16; ++len) {
    const Section* s = image.section_at(va);
    if (!s || s->writable) return sd;  // left the rx sections
    auto w = image.word_at(va);
    if (!w) return sd;
    auto insn = decode(*w);
    if (!insn) return sd;  // DecodeError surfaces as non-survival
    sd.seq.push_back(*insn);
    if (is_control_flow(insn->op)) break;
    va += 4;
  }
  sd.decodable = true;
  return sd;
}

bool semantically_equivalent(uint32_t g1_start, uint32_t g2_start, const ProgramImage& image,
                             unsigned states, uint64_t seed) {
  ProgramImage simg = sandbox_image(image);
  return equivalent_on_sandbox(g1_start, g2_start, simg, states, seed);
}

SurvivalReport chain_survival(const std::vector<std::vector<uint32_t>>& chains, uint32_t delta,
                              const ProgramImage& image, unsigned max_len) {
  auto scan = scan_gadgets(image, max_len);
  std::set<uint32_t> starts;
  for (const auto& g : scan) starts.insert(g.start);
  std::map<uint32_t, Gadget> by_start;
  for (const auto& g : scan) by_start[g.start] = g;

  SurvivalReport report;
  report.gadget_count = scan.size();
  report.chains_before = chains.size();

  ProgramImage simg = sandbox_image(image);

  auto gadget_survives = [&](uint32_t start, int k) {
    const Gadget& g = by_start[start];
    ShiftDecode sd = shift_decode(g, k, delta, image);
    if (!sd.decodable) return false;
    int64_t shifted = static_cast<int64_t>(start) + static_cast<int64_t>(k) * delta;
    return equivalent_on_sandbox(start, static_cast<uint32_t>(shifted), simg, 64, 0x5EED5EED);
  };

  for (const auto& chain : chains) {
    for (uint32_t va : chain) {
      if (!starts.count(va)) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", va);
        throw UnknownGadgetError(std::string("chain references unscanned gadget ") + buf);
      }
    }
    ChainSurvival cs;
    cs.survives_minus = true;
    cs.survives_plus = true;
    for (uint32_t va : chain) {
      auto it = report.per_gadget.find(va);
      if (it == report.per_gadget.end()) {
        bool m = gadget_survives(va, -1);
        bool p = gadget_survives(va, +1);
        it = report.per_gadget.emplace(va, std::make_pair(m, p)).first;
      }
      cs.survives_minus = cs.survives_minus && it->second.first;
      cs.survives_plus = cs.survives_plus && it->second.second;
    }
    if (cs.survives()) ++report.chains_after;
    report.per_chain.push_back(cs);
  }
  return report;
}

}  // namespace pns
