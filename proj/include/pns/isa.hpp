#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pns/errors.hpp"

namespace pns {

// PNS-32: fixed 4-byte instructions, 16 GPRs (r13 = sp by convention).
// Word layout: opcode[31:24] rd[23:20] ra[19:16] rb[15:12] imm12[11:0].
// LDI/LUI use rd + imm16[15:0]; JMP/CALL use imm24[23:0] (signed word offset).
enum class Op : uint8_t {
  Nop = 0x00,
  Halt = 0x01,
  Trap = 0x02,
  Add = 0x10,
  Sub = 0x11,
  Xor = 0x12,
  And = 0x13,
  Or = 0x14,
  Shl = 0x15,
  Shr = 0x16,
  Mov = 0x17,
  Ldi = 0x18,
  Lui = 0x19,
  Ld = 0x20,
  St = 0x21,
  Jmp = 0x30,
  Jr = 0x31,
  Beq = 0x32,
  Bne = 0x33,
  Call = 0x34,
  Callr = 0x35,
  Ret = 0x36,
  Encp = 0x40,
  Decp = 0x41,
  Out = 0x50,
};

enum class Format {
  None,  // nop halt trap ret
  R3,    // add sub xor and or shl shr: rd, ra, rb
  R2,    // mov: rd, ra
  RI16,  // ldi (signed), lui (upper-half pattern): rd, imm16
  Mem,   // ld/st: rd, ra, imm12 (st stores rd)
  J24,   // jmp call: imm24 word offset from pc+4
  R1,    // jr callr out encp decp: rd
  Br,    // beq bne: ra, rb, imm12 word offset from pc+4
};

struct Instruction {
  Op op = Op::Nop;
  uint8_t rd = 0;
  uint8_t ra = 0;
  uint8_t rb = 0;
  int32_t imm = 0;
  bool operator==(const Instruction&) const = default;
};

inline constexpr uint32_t kTrapWord = 0x02000000u;

bool valid_opcode(uint8_t byte);
Format format_of(Op op);
const char* mnemonic(Op op);

/// Instructions that change the pc (terminate a basic block).
bool is_control_flow(Op op);
/// Gadget terminators: ret, jr, callr.
bool is_terminator(Op op);

/// Total: every word maps to an instruction or nullopt (invalid opcode byte).
std::optional<Instruction> decode(uint32_t word);

/// Inverse of decode on well-formed instructions. Throws RangeError when a
/// field exceeds its width.
uint32_t encode(const Instruction& insn);

/// One text line; pc-relative targets resolved against `va`. Invalid words
/// render as ".invalid 0xNN".
std::string disassemble(uint32_t word, uint32_t va);

/// Operand text without target resolution ("add r1, r2, r3"); used for
/// pattern-matching decoded gadgets.
std::string instruction_text(const Instruction& insn);

}  // namespace pns
