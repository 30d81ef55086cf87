#include "pns/isa.hpp"

#include <cstdio>

namespace pns {

namespace {

int32_t sext(uint32_t value, unsigned bits) {
  uint32_t shift = 32 - bits;
  return static_cast<int32_t>(value << shift) >> shift;
}

void check_reg(uint8_t r, const char* name) {
  if (r > 15) throw RangeError(std::string(name) + " register index > 15");
}

void check_imm(int64_t v, int64_t lo, int64_t hi, const char* what) {
  if (v < lo || v > hi) {
    throw RangeError(std::string(what) + " immediate " + std::to_string(v) + " out of range");
  }
}

}  // namespace

bool valid_opcode(uint8_t byte) {
  switch (byte) {
    case 0x00: case 0x01: case 0x02:
    case 0x10: case 0x11: case 0x12: case 0x13: case 0x14:
    case 0x15: case 0x16: case 0x17: case 0x18: case 0x19:
    case 0x20: case 0x21:
    case 0x30: case 0x31: case 0x32: case 0x33: case 0x34: case 0x35: case 0x36:
    case 0x40: case 0x41:
    case 0x50:
      return true;
    default:
      return false;
  }
}

Format format_of(Op op) {
  switch (op) {
    case Op::Nop: case Op::Halt: case Op::Trap: case Op::Ret:
      return Format::None;
    case Op::Add: case Op::Sub: case Op::Xor: case Op::And:
    case Op::Or: case Op::Shl: case Op::Shr:
      return Format::R3;
    case Op::Mov:
      return Format::R2;
    case Op::Ldi: case Op::Lui:
      return Format::RI16;
    case Op::Ld: case Op::St:
      return Format::Mem;
    case Op::Jmp: case Op::Call:
      return Format::J24;
    case Op::Jr: case Op::Callr: case Op::Out: case Op::Encp: case Op::Decp:
      return Format::R1;
    case Op::Beq: case Op::Bne:
      return Format::Br;
  }
  return Format::None;
}

const char* mnemonic(Op op) {
  switch (op) {
    case Op::Nop: return "nop";
    case Op::Halt: return "halt";
    case Op::Trap: return "trap";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Xor: return "xor";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Shl: return "shl";
    case Op::Shr: return "shr";
    case Op::Mov: return "mov";
    case Op::Ldi: return "ldi";
    case Op::Lui: return "lui";
    case Op::Ld: return "ld";
    case Op::St: return "st";
    case Op::Jmp: return "jmp";
    case Op::Jr: return "jr";
    case Op::Beq: return "beq";
    case Op::Bne: return "bne";
    case Op::Call: return "call";
    case Op::Callr: return "callr";
    case Op::Ret: return "ret";
    case Op::Encp: return "encp";
    case Op::Decp: return "decp";
    case Op::Out: return "out";
  }
  return "?";
}

bool is_control_flow(Op op) {
  switch (op) {
    case Op::Jmp: case Op::Jr: case Op::Beq: case Op::Bne:
    case Op::Call: case Op::Callr: case Op::Ret:
      return true;
    default:
      return false;
  }
}

bool is_terminator(Op op) {
  return op == Op::Ret || op == Op::Jr || op == Op::Callr;
}

std::optional<Instruction> decode(uint32_t word) {
  uint8_t opb = static_cast<uint8_t>(word >> 24);
  if (!valid_opcode(opb)) return std::nullopt;
  Instruction i;
  i.op = static_cast<Op>(opb);
  switch (format_of(i.op)) {
    case Format::None:
      break;
    case Format::R3:
      i.rd = (word >> 20) & 0xF;
      i.ra = (word >> 16) & 0xF;
      i.rb = (word >> 12) & 0xF;
      break;
    case Format::R2:
      i.rd = (word >> 20) & 0xF;
      i.ra = (word >> 16) & 0xF;
      break;
    case Format::RI16:
      i.rd = (word >> 20) & 0xF;
      i.imm = (i.op == Op::Ldi) ? sext(word & 0xFFFF, 16)
                                : static_cast<int32_t>(word & 0xFFFF);
      break;
    case Format::Mem:
      i.rd = (word >> 20) & 0xF;
      i.ra = (word >> 16) & 0xF;
      i.imm = sext(word & 0xFFF, 12);
      break;
    case Format::J24:
      i.imm = sext(word & 0xFFFFFF, 24);
      break;
    case Format::R1:
      i.rd = (word >> 20) & 0xF;
      break;
    case Format::Br:
      i.ra = (word >> 16) & 0xF;
      i.rb = (word >> 12) & 0xF;
      i.imm = sext(word & 0xFFF, 12);
      break;
  }
  return i;
}

uint32_t encode(const Instruction& insn) {
  uint32_t w = static_cast<uint32_t>(insn.op) << 24;
  switch (format_of(insn.op)) {
    case Format::None:
      break;
    case Format::R3:
      check_reg(insn.rd, "rd");
      check_reg(insn.ra, "ra");
      check_reg(insn.rb, "rb");
      w |= (uint32_t(insn.rd) << 20) | (uint32_t(insn.ra) << 16) | (uint32_t(insn.rb) << 12);
      break;
    case Format::R2:
      check_reg(insn.rd, "rd");
      check_reg(insn.ra, "ra");
      w |= (uint32_t(insn.rd) << 20) | (uint32_t(insn.ra) << 16);
      break;
    case Format::RI16:
      check_reg(insn.rd, "rd");
      if (insn.op == Op::Ldi) {
        check_imm(insn.imm, -32768, 32767, "ldi");
      } else {
        check_imm(insn.imm, 0, 65535, "lui");
      }
      w |= (uint32_t(insn.rd) << 20) | (static_cast<uint32_t>(insn.imm) & 0xFFFF);
      break;
    case Format::Mem:
      check_reg(insn.rd, "rd");
      check_reg(insn.ra, "ra");
      check_imm(insn.imm, -2048, 2047, "mem");
      w |= (uint32_t(insn.rd) << 20) | (uint32_t(insn.ra) << 16) |
           (static_cast<uint32_t>(insn.imm) & 0xFFF);
      break;
    case Format::J24:
      check_imm(insn.imm, -(1 << 23), (1 << 23) - 1, "jump");
      w |= static_cast<uint32_t>(insn.imm) & 0xFFFFFF;
      break;
    case Format::R1:
      check_reg(insn.rd, "rd");
      w |= uint32_t(insn.rd) << 20;
      break;
    case Format::Br:
      check_reg(insn.ra, "ra");
      check_reg(insn.rb, "rb");
      check_imm(insn.imm, -2048, 2047, "branch");
      w |= (uint32_t(insn.ra) << 16) | (uint32_t(insn.rb) << 12) |
           (static_cast<uint32_t>(insn.imm) & 0xFFF);
      break;
  }
  return w;
}

std::string instruction_text(const Instruction& i) {
  char buf[64];
  switch (format_of(i.op)) {
    case Format::None:
      return mnemonic(i.op);
    case Format::R3:
      std::snprintf(buf, sizeof buf, "%s r%u, r%u, r%u", mnemonic(i.op), i.rd, i.ra, i.rb);
      return buf;
    case Format::R2:
      std::snprintf(buf, sizeof buf, "%s r%u, r%u", mnemonic(i.op), i.rd, i.ra);
      return buf;
    case Format::RI16:
      if (i.op == Op::Ldi) {
        std::snprintf(buf, sizeof buf, "ldi r%u, %d", i.rd, i.imm);
      } else {
        std::snprintf(buf, sizeof buf, "lui r%u, 0x%x", i.rd, static_cast<uint32_t>(i.imm));
      }
      return buf;
    case Format::Mem:
      std::snprintf(buf, sizeof buf, "%s r%u, r%u, %d", mnemonic(i.op), i.rd, i.ra, i.imm);
      return buf;
    case Format::J24:
      std::snprintf(buf, sizeof buf, "%s %+d", mnemonic(i.op), i.imm);
      return buf;
    case Format::R1:
      std::snprintf(buf, sizeof buf, "%s r%u", mnemonic(i.op), i.rd);
      return buf;
    case Format::Br:
      std::snprintf(buf, sizeof buf, "%s r%u, r%u, %+d", mnemonic(i.op), i.ra, i.rb, i.imm);
      return buf;
  }
  return "?";
}

std::string disassemble(uint32_t word, uint32_t va) {
  auto insn = decode(word);
  char buf[64];
  if (!insn) {
    std::snprintf(buf, sizeof buf, ".invalid 0x%02x", word >> 24);
    return buf;
  }
  const Instruction& i = *insn;
  uint32_t target = va + 4 + static_cast<uint32_t>(i.imm) * 4;
  switch (i.op) {
    case Op::Jmp:
    case Op::Call:
      std::snprintf(buf, sizeof buf, "%s 0x%x", mnemonic(i.op), target);
      return buf;
    case Op::Beq:
    case Op::Bne:
      std::snprintf(buf, sizeof buf, "%s r%u, r%u, 0x%x", mnemonic(i.op), i.ra, i.rb, target);
      return buf;
    default:
      return instruction_text(i);
  }
}

}  // namespace pns
