#include "pns/image.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pns {

namespace {

constexpr uint32_t kDefaultTextBase = 0x1000;
constexpr uint32_t kDefaultDataBase = 0x4000;

std::string hex32(uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

const Section* ProgramImage::section_at(uint32_t va) const {
  for (const auto& s : sections) {
    if (s.contains(va)) return &s;
  }
  return nullptr;
}

std::optional<uint32_t> ProgramImage::word_at(uint32_t va) const {
  const Section* s = section_at(va);
  if (!s || (va - s->base) % 4 != 0) return std::nullopt;
  return s->words[(va - s->base) / 4];
}

bool ProgramImage::is_trap_location(uint32_t va) const {
  return std::binary_search(trap_locations.begin(), trap_locations.end(), va);
}

uint32_t ProgramImage::symbol(const std::string& name) const {
  auto it = symbols.find(name);
  if (it == symbols.end()) throw HarnessError("unknown symbol: " + name);
  return it->second;
}

void ProgramImage::validate(const PhantomConfig& cfg) const {
  for (const auto& s : sections) {
    if (s.base % 4 != 0) {
      throw LoadError("alignment", "section " + s.name + " base not 4-aligned");
    }
    if (static_cast<uint64_t>(s.base) + s.size_bytes() > 0x100000000ull) {
      throw LoadError("range", "section " + s.name + " exceeds the 32-bit space");
    }
  }
  for (size_t i = 0; i < sections.size(); ++i) {
    for (size_t j = i + 1; j < sections.size(); ++j) {
      const auto& a = sections[i];
      const auto& b = sections[j];
      if (a.base < b.end() && b.base < a.end() && !a.words.empty() && !b.words.empty()) {
        throw LoadError("overlap", "sections " + a.name + " and " + b.name + " overlap");
      }
    }
  }
  // All phantom names of rx code must stay inside the 32-bit range.
  uint32_t max_shift = cfg.max_shift();
  for (const auto& s : sections) {
    if (s.writable || s.words.empty()) continue;
    if (s.base < max_shift) {
      throw LoadError("phantom-range", "rx base " + hex32(s.base) + " below " +
                                           std::to_string(max_shift));
    }
    uint64_t top = static_cast<uint64_t>(s.end()) - 4;
    if (top + max_shift > 0xFFFFFFFFull) {
      throw LoadError("phantom-range", "rx section " + s.name + " too high");
    }
  }
  const Section* es = section_at(entry);
  if (!es || es->writable || entry % 4 != 0) {
    throw LoadError("entry", "entry " + hex32(entry) + " is not executable");
  }
  if (trap_mode) {
    if (trap_locations.size() != bbl_starts.size()) {
      throw LoadError("trap-coverage", "trap/bbl table sizes differ");
    }
    for (uint32_t t : trap_locations) {
      if (word_at(t) != kTrapWord) {
        throw LoadError("trap-word", hex32(t) + " does not hold a TRAP");
      }
      if (!std::binary_search(bbl_starts.begin(), bbl_starts.end(), t + 4)) {
        throw LoadError("trap-entry", hex32(t) + "+4 is not a bbl entry");
      }
    }
    if (is_trap_location(entry)) {
      throw LoadError("entry", "entry points at a TRAP");
    }
  } else {
    if (!trap_locations.empty() || !bbl_starts.empty()) {
      throw LoadError("trap-coverage", "trap tables present without trap_mode");
    }
  }
  for (uint32_t r : code_refs) {
    const Section* ds = section_at(r);
    if (!ds || !ds->writable) throw LoadError("code-ref", hex32(r) + " not in a rw section");
    const Section* ts = section_at(*word_at(r));
    if (!ts || ts->writable) {
      throw LoadError("code-ref", "word at " + hex32(r) + " is not a text address");
    }
  }
}

// ---------------------------------------------------------------------------
// assembler
// ---------------------------------------------------------------------------

namespace {

struct Token {
  std::string text;
};

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool parse_number(const std::string& t, int64_t& out) {
  if (t.empty()) return false;
  size_t pos = 0;
  bool neg = false;
  if (t[pos] == '-' || t[pos] == '+') {
    neg = t[pos] == '-';
    ++pos;
  }
  if (pos >= t.size()) return false;
  int base = 10;
  if (t.compare(pos, 2, "0x") == 0 || t.compare(pos, 2, "0X") == 0) {
    base = 16;
    pos += 2;
    if (pos >= t.size()) return false;
  }
  int64_t v = 0;
  for (; pos < t.size(); ++pos) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t[pos])));
    int d;
    if (c >= '0' && c <= '9') {
      d = c - '0';
    } else if (base == 16 && c >= 'a' && c <= 'f') {
      d = 10 + (c - 'a');
    } else {
      return false;
    }
    v = v * base + d;
    if (v > 0x1FFFFFFFFll) return false;
  }
  out = neg ? -v : v;
  return true;
}

bool parse_register(const std::string& t, uint8_t& out) {
  if (t == "sp") {
    out = 13;
    return true;
  }
  if (t.size() < 2 || (t[0] != 'r' && t[0] != 'R')) return false;
  int64_t v;
  if (!parse_number(t.substr(1), v) || v < 0 || v > 15) return false;
  out = static_cast<uint8_t>(v);
  return true;
}

bool valid_label(const std::string& t) {
  if (t.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(t[0])) && t[0] != '_') return false;
  for (char c : t) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

std::optional<Op> mnemonic_to_op(const std::string& m) {
  static const std::map<std::string, Op> table = {
      {"nop", Op::Nop},   {"halt", Op::Halt},   {"trap", Op::Trap}, {"add", Op::Add},
      {"sub", Op::Sub},   {"xor", Op::Xor},     {"and", Op::And},   {"or", Op::Or},
      {"shl", Op::Shl},   {"shr", Op::Shr},     {"mov", Op::Mov},   {"ldi", Op::Ldi},
      {"lui", Op::Lui},   {"ld", Op::Ld},       {"st", Op::St},     {"jmp", Op::Jmp},
      {"jr", Op::Jr},     {"beq", Op::Beq},     {"bne", Op::Bne},   {"call", Op::Call},
      {"callr", Op::Callr}, {"ret", Op::Ret},   {"encp", Op::Encp}, {"decp", Op::Decp},
      {"out", Op::Out},
  };
  auto it = table.find(m);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

enum class ItemKind { Insn, Word };

struct AsmItem {
  ItemKind kind;
  int line;
  uint32_t va;
  bool in_text;
  std::vector<std::string> tokens;  // mnemonic + operands, or .word operand
};

}  // namespace

ProgramImage assemble(const std::string& source) {
  std::istringstream in(source);
  std::string line;
  int lineno = 0;

  enum class Cur { NoneYet, Text, Data };
  Cur cur = Cur::NoneYet;
  bool text_seen = false, data_seen = false;
  bool text_touched = false, data_touched = false;  // any label or content yet
  uint32_t text_base = kDefaultTextBase, data_base = kDefaultDataBase;
  std::vector<AsmItem> text_items, data_items;
  std::map<std::string, uint32_t> labels;
  std::set<std::string> text_labels;

  auto cur_size = [&](Cur c) -> uint32_t {
    return 4 * static_cast<uint32_t>(c == Cur::Text ? text_items.size() : data_items.size());
  };
  auto touch = [&]() { (cur == Cur::Text ? text_touched : data_touched) = true; };

  // pass 1: layout and label collection
  while (std::getline(in, line)) {
    ++lineno;
    auto tokens = tokenize(line);
    size_t idx = 0;
    // leading label definitions
    while (idx < tokens.size() && tokens[idx].back() == ':') {
      std::string name = tokens[idx].substr(0, tokens[idx].size() - 1);
      if (!valid_label(name)) throw AssemblyError(lineno, "bad label '" + name + "'");
      if (labels.count(name)) throw AssemblyError(lineno, "duplicate label '" + name + "'");
      if (cur == Cur::NoneYet) throw AssemblyError(lineno, "label before .text/.data");
      uint32_t va = (cur == Cur::Text ? text_base : data_base) + cur_size(cur);
      labels[name] = va;
      if (cur == Cur::Text) text_labels.insert(name);
      touch();
      ++idx;
    }
    if (idx >= tokens.size()) continue;
    const std::string& head = tokens[idx];

    if (head == ".text" || head == ".data") {
      bool is_text = head == ".text";
      if ((is_text && text_seen) || (!is_text && data_seen)) {
        throw AssemblyError(lineno, "duplicate " + head + " directive");
      }
      (is_text ? text_seen : data_seen) = true;
      cur = is_text ? Cur::Text : Cur::Data;
      if (idx + 1 != tokens.size()) throw AssemblyError(lineno, head + " takes no operands");
      continue;
    }
    if (head == ".org") {
      if (cur == Cur::NoneYet) throw AssemblyError(lineno, ".org outside a section");
      if (cur == Cur::Text ? text_touched : data_touched) {
        throw AssemblyError(lineno, ".org after section content");
      }
      int64_t v;
      if (idx + 2 != tokens.size() || !parse_number(tokens[idx + 1], v) || v < 0 ||
          v > 0xFFFFFFFFll || v % 4 != 0) {
        throw AssemblyError(lineno, ".org needs a 4-aligned 32-bit address");
      }
      (cur == Cur::Text ? text_base : data_base) = static_cast<uint32_t>(v);
      continue;
    }
    if (head == ".word") {
      if (cur != Cur::Data) throw AssemblyError(lineno, ".word is only allowed in .data");
      if (idx + 2 != tokens.size()) throw AssemblyError(lineno, ".word takes one operand");
      data_items.push_back({ItemKind::Word, lineno, data_base + cur_size(cur), false,
                            {tokens[idx + 1]}});
      touch();
      continue;
    }
    // instruction
    if (cur != Cur::Text) throw AssemblyError(lineno, "instructions are only allowed in .text");
    if (!mnemonic_to_op(head)) throw AssemblyError(lineno, "unknown mnemonic '" + head + "'");
    AsmItem item{ItemKind::Insn, lineno, text_base + cur_size(cur), true, {}};
    item.tokens.assign(tokens.begin() + static_cast<long>(idx), tokens.end());
    text_items.push_back(std::move(item));
    touch();
  }

  // label VAs were assigned against the bases in effect at definition time;
  // .org is restricted to pre-content so those bases are final.

  ProgramImage image;
  image.symbols = labels;

  auto resolve_value = [&](const std::string& t, int line_no, bool allow_text_label,
                           bool& was_text_label) -> int64_t {
    was_text_label = false;
    int64_t v;
    if (parse_number(t, v)) return v;
    auto it = labels.find(t);
    if (it == labels.end()) throw AssemblyError(line_no, "undefined label '" + t + "'");
    was_text_label = text_labels.count(t) > 0;
    if (was_text_label && !allow_text_label) {
      throw AssemblyError(line_no,
                          "text label '" + t + "' is not relocatable here; use .word in .data");
    }
    return it->second;
  };

  // pass 2: encode
  Section text{"text", text_base, false, {}};
  for (const auto& item : text_items) {
    const auto& tk = item.tokens;
    Op op = *mnemonic_to_op(tk[0]);
    Instruction insn;
    insn.op = op;
    auto need = [&](size_t n) {
      if (tk.size() != n + 1) {
        throw AssemblyError(item.line, std::string(mnemonic(op)) + " expects " +
                                           std::to_string(n) + " operands");
      }
    };
    auto reg = [&](size_t i) {
      uint8_t r;
      if (!parse_register(tk[i], r)) {
        throw AssemblyError(item.line, "bad register '" + tk[i] + "'");
      }
      return r;
    };
    auto imm_value = [&](size_t i, int64_t lo, int64_t hi) {
      bool was_text = false;
      int64_t v = resolve_value(tk[i], item.line, false, was_text);
      if (v < lo || v > hi) {
        throw AssemblyError(item.line, "immediate " + tk[i] + " out of range");
      }
      return v;
    };
    auto branch_target = [&](size_t i) {
      bool was_text = false;
      int64_t target = resolve_value(tk[i], item.line, true, was_text);
      int64_t off = target - (static_cast<int64_t>(item.va) + 4);
      if (off % 4 != 0) throw AssemblyError(item.line, "misaligned branch target");
      return off / 4;
    };

    switch (format_of(op)) {
      case Format::None:
        need(0);
        break;
      case Format::R3:
        need(3);
        insn.rd = reg(1);
        insn.ra = reg(2);
        insn.rb = reg(3);
        break;
      case Format::R2:
        need(2);
        insn.rd = reg(1);
        insn.ra = reg(2);
        break;
      case Format::RI16: {
        need(2);
        // ldi also accepts 0x8000..0xFFFF as a raw 16-bit pattern
        int64_t v = imm_value(2, op == Op::Ldi ? -32768 : 0, 65535);
        if (op == Op::Ldi && v > 32767) v -= 65536;
        insn.rd = reg(1);
        insn.imm = static_cast<int32_t>(v);
        break;
      }
      case Format::Mem:
        need(3);
        insn.rd = reg(1);
        insn.ra = reg(2);
        insn.imm = static_cast<int32_t>(imm_value(3, -2048, 2047));
        break;
      case Format::J24:
        need(1);
        insn.imm = static_cast<int32_t>(branch_target(1));
        break;
      case Format::R1:
        need(1);
        insn.rd = reg(1);
        break;
      case Format::Br:
        need(3);
        insn.ra = reg(1);
        insn.rb = reg(2);
        insn.imm = static_cast<int32_t>(branch_target(3));
        break;
    }
    try {
      text.words.push_back(encode(insn));
    } catch (const RangeError& e) {
      throw AssemblyError(item.line, e.what());
    }
  }

  Section data{"data", data_base, true, {}};
  for (const auto& item : data_items) {
    bool was_text = false;
    int64_t v = resolve_value(item.tokens[0], item.line, true, was_text);
    if (v < 0 || v > 0xFFFFFFFFll) throw AssemblyError(item.line, ".word value out of range");
    if (was_text) image.code_refs.push_back(item.va);
    data.words.push_back(static_cast<uint32_t>(v));
  }

  if (text.words.empty()) throw AssemblyError(lineno, "empty .text section");
  image.sections.push_back(std::move(text));
  if (!data.words.empty()) image.sections.push_back(std::move(data));

  auto main_it = labels.find("main");
  image.entry = main_it != labels.end() ? main_it->second : text_base;

  try {
    image.validate();
  } catch (const LoadError& e) {
    throw AssemblyError(0, e.what());
  }
  return image;
}

// ---------------------------------------------------------------------------
// basic blocks and the trap rewrite
// ---------------------------------------------------------------------------

std::vector<BasicBlock> identify_bbls(const ProgramImage& image) {
  std::set<uint32_t> leaders;
  std::vector<std::pair<uint32_t, Instruction>> insns;  // va -> decoded

  for (const auto& s : image.sections) {
    if (s.writable || s.words.empty()) continue;
    leaders.insert(s.base);
    for (size_t i = 0; i < s.words.size(); ++i) {
      uint32_t va = s.base + static_cast<uint32_t>(i) * 4;
      auto insn = decode(s.words[i]);
      if (!insn) {
        throw AnalysisError("undecodable word at " + hex32(va));
      }
      insns.emplace_back(va, *insn);
    }
  }
  leaders.insert(image.entry);

  for (const auto& [va, insn] : insns) {
    if (!is_control_flow(insn.op)) continue;
    uint32_t next = va + 4;
    if (image.section_at(next) && !image.section_at(next)->writable) leaders.insert(next);
    if (insn.op == Op::Jmp || insn.op == Op::Call || insn.op == Op::Beq || insn.op == Op::Bne) {
      uint32_t target = va + 4 + static_cast<uint32_t>(insn.imm) * 4;
      const Section* ts = image.section_at(target);
      if (!ts || ts->writable) {
        throw AnalysisError("branch target " + hex32(target) + " outside rx sections");
      }
      leaders.insert(target);
    }
  }

  std::vector<BasicBlock> blocks;
  for (const auto& s : image.sections) {
    if (s.writable || s.words.empty()) continue;
    std::vector<uint32_t> ls;
    for (uint32_t l : leaders) {
      if (s.contains(l)) ls.push_back(l);
    }
    for (size_t i = 0; i < ls.size(); ++i) {
      uint32_t next_leader = (i + 1 < ls.size()) ? ls[i + 1] : s.end();
      BasicBlock b;
      b.entry = ls[i];
      b.end = next_leader - 4;
      auto last = decode(*image.word_at(b.end));
      bool falls = true;
      if (last && (last->op == Op::Jmp || last->op == Op::Jr || last->op == Op::Ret ||
                   last->op == Op::Halt)) {
        falls = false;
      }
      if (falls && image.section_at(b.end + 4) && !image.section_at(b.end + 4)->writable) {
        b.fallthrough = b.end + 4;
      }
      blocks.push_back(b);
    }
  }
  return blocks;
}

ProgramImage insert_traps(const ProgramImage& image) {
  if (image.trap_mode) throw RewriteError("image already trap-rewritten");
  auto blocks = identify_bbls(image);
  if (blocks.empty()) throw RewriteError("no entry BBL");

  // new_addr(x) = x + 4 * |leaders <= x| within x's section
  std::vector<uint32_t> leaders;
  leaders.reserve(blocks.size());
  for (const auto& b : blocks) leaders.push_back(b.entry);
  std::sort(leaders.begin(), leaders.end());

  // Insertion offsets accumulate per section (each section's base is fixed).
  auto map_va = [&](uint32_t va) -> uint32_t {
    const Section* s = image.section_at(va);
    if (!s || s->writable) return va;
    auto lo = std::lower_bound(leaders.begin(), leaders.end(), s->base);
    auto it = std::upper_bound(leaders.begin(), leaders.end(), va);
    return va + 4 * static_cast<uint32_t>(it - lo);
  };

  ProgramImage out;
  out.trap_mode = true;
  out.entry = map_va(image.entry);
  for (const auto& [name, va] : image.symbols) {
    const Section* s = image.section_at(va);
    out.symbols[name] = (s && !s->writable) ? map_va(va) : va;
  }

  for (const auto& s : image.sections) {
    Section ns{s.name, s.base, s.writable, {}};
    if (s.writable) {
      ns.words = s.words;
      out.sections.push_back(std::move(ns));
      continue;
    }
    for (size_t i = 0; i < s.words.size(); ++i) {
      uint32_t old_va = s.base + static_cast<uint32_t>(i) * 4;
      if (std::binary_search(leaders.begin(), leaders.end(), old_va)) {
        out.trap_locations.push_back(s.base + static_cast<uint32_t>(ns.words.size()) * 4);
        ns.words.push_back(kTrapWord);
        out.bbl_starts.push_back(s.base + static_cast<uint32_t>(ns.words.size()) * 4);
      }
      uint32_t new_va = s.base + static_cast<uint32_t>(ns.words.size()) * 4;
      auto insn = decode(s.words[i]);
      if (insn && (insn->op == Op::Jmp || insn->op == Op::Call || insn->op == Op::Beq ||
                   insn->op == Op::Bne)) {
        uint32_t old_target = old_va + 4 + static_cast<uint32_t>(insn->imm) * 4;
        uint32_t new_target = map_va(old_target);
        int64_t off = (static_cast<int64_t>(new_target) - (static_cast<int64_t>(new_va) + 4)) / 4;
        Instruction fixed = *insn;
        fixed.imm = static_cast<int32_t>(off);
        try {
          ns.words.push_back(encode(fixed));
        } catch (const RangeError& e) {
          throw RewriteError(std::string("re-layout overflows an immediate: ") + e.what());
        }
      } else {
        ns.words.push_back(s.words[i]);
      }
    }
    out.sections.push_back(std::move(ns));
  }

  // data words that hold text addresses follow the moved code
  out.code_refs = image.code_refs;
  for (uint32_t ref : out.code_refs) {
    for (auto& s : out.sections) {
      if (s.writable && s.contains(ref)) {
        uint32_t& w = s.words[(ref - s.base) / 4];
        w = map_va(w);
      }
    }
  }

  std::sort(out.bbl_starts.begin(), out.bbl_starts.end());
  std::sort(out.trap_locations.begin(), out.trap_locations.end());

  try {
    out.validate();
  } catch (const LoadError& e) {
    throw RewriteError(std::string("rewritten image invalid: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON image format
// ---------------------------------------------------------------------------

namespace {

uint32_t parse_hex_field(const nlohmann::json& j, const std::string& what) {
  if (!j.is_string()) throw LoadError("schema", what + " must be a hex string");
  int64_t v;
  if (!parse_number(j.get<std::string>(), v) || v < 0 || v > 0xFFFFFFFFll) {
    throw LoadError("schema", what + " is not a 32-bit value");
  }
  return static_cast<uint32_t>(v);
}

}  // namespace

ProgramImage load_image(const std::string& json_text, const PhantomConfig& cfg) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("schema", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw LoadError("schema", "top level must be an object");
  static const std::set<std::string> allowed = {"entry",   "trap_mode",      "sections",
                                                "symbols", "bbl_starts",     "trap_locations",
                                                "code_refs"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw LoadError("schema", "unknown key '" + it.key() + "'");
  }
  for (const char* req : {"entry", "trap_mode", "sections"}) {
    if (!j.contains(req)) throw LoadError("schema", std::string("missing key '") + req + "'");
  }

  ProgramImage image;
  image.entry = parse_hex_field(j["entry"], "entry");
  if (!j["trap_mode"].is_boolean()) throw LoadError("schema", "trap_mode must be a bool");
  image.trap_mode = j["trap_mode"].get<bool>();

  if (!j["sections"].is_array()) throw LoadError("schema", "sections must be an array");
  for (const auto& js : j["sections"]) {
    Section s;
    for (const char* req : {"name", "base", "perm", "words"}) {
      if (!js.contains(req)) throw LoadError("schema", std::string("section missing '") + req + "'");
    }
    s.name = js["name"].get<std::string>();
    s.base = parse_hex_field(js["base"], "section base");
    std::string perm = js["perm"].get<std::string>();
    if (perm == "rw") {
      s.writable = true;
    } else if (perm == "rx") {
      s.writable = false;
    } else {
      throw LoadError("schema", "perm must be rx or rw");
    }
    for (const auto& w : js["words"]) {
      s.words.push_back(parse_hex_field(w, "section word"));
    }
    image.sections.push_back(std::move(s));
  }
  if (j.contains("symbols")) {
    for (auto it = j["symbols"].begin(); it != j["symbols"].end(); ++it) {
      image.symbols[it.key()] = parse_hex_field(it.value(), "symbol " + it.key());
    }
  }
  auto read_list = [&](const char* key, std::vector<uint32_t>& out) {
    if (!j.contains(key)) return;
    for (const auto& v : j[key]) out.push_back(parse_hex_field(v, key));
    std::sort(out.begin(), out.end());
  };
  read_list("bbl_starts", image.bbl_starts);
  read_list("trap_locations", image.trap_locations);
  read_list("code_refs", image.code_refs);

  image.validate(cfg);
  return image;
}

std::string save_image(const ProgramImage& image) {
  nlohmann::ordered_json j;
  j["entry"] = hex32(image.entry);
  j["trap_mode"] = image.trap_mode;
  j["sections"] = nlohmann::ordered_json::array();
  for (const auto& s : image.sections) {
    nlohmann::ordered_json js;
    js["name"] = s.name;
    js["base"] = hex32(s.base);
    js["perm"] = s.writable ? "rw" : "rx";
    auto words = nlohmann::ordered_json::array();
    for (uint32_t w : s.words) words.push_back(hex32(w));
    js["words"] = std::move(words);
    j["sections"].push_back(std::move(js));
  }
  nlohmann::ordered_json syms = nlohmann::ordered_json::object();
  for (const auto& [name, va] : image.symbols) syms[name] = hex32(va);
  j["symbols"] = std::move(syms);
  auto list = [](const std::vector<uint32_t>& v) {
    auto a = nlohmann::ordered_json::array();
    for (uint32_t x : v) a.push_back(hex32(x));
    return a;
  };
  j["bbl_starts"] = list(image.bbl_starts);
  j["trap_locations"] = list(image.trap_locations);
  j["code_refs"] = list(image.code_refs);
  return j.dump(2) + "\n";
}

}  // namespace pns
