// Copyright 2026 The ropscrub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ropscrub/isa/encoder.hpp"

#include <limits>
#include <string>

#include "ropscrub/error.hpp"

namespace ropscrub::isa {

namespace {

[[noreturn]] void unsupported(const SubsetInstruction& instr, const std::string& why) {
  std::string text;
  try {
    text = format_att(instr);
  } catch (...) {
    text = std::string(base_name(instr.op));
  }
  throw Error(ErrorCode::UnsupportedInstruction, "cannot encode '" + text + "': " + why);
}

bool fits_int8(std::int64_t v) { return v >= -128 && v <= 127; }
bool fits_int32(std::int64_t v) {
  return v >= std::numeric_limits<std::int32_t>::min() &&
         v <= std::numeric_limits<std::int32_t>::max();
}

// Sign-interprets the low `w` bits of v.
std::int64_t sign_extend(std::int64_t v, Width w) {
  switch (w) {
    case Width::b8: return static_cast<std::int8_t>(v);
    case Width::b16: return static_cast<std::int16_t>(v);
    case Width::b32: return static_cast<std::int32_t>(v);
    case Width::b64: return v;
  }
  return v;
}

class Builder {
 public:
  explicit Builder(const SubsetInstruction& instr) : instr_(instr) {}

  void byte(std::uint8_t b) {
    if (out_.length >= kMaxInstructionLength) unsupported(instr_, "exceeds 15 bytes");
    out_.storage[out_.length++] = b;
  }

  void little_endian(std::uint64_t v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  EncodedInstruction done() { return out_; }

 private:
  const SubsetInstruction& instr_;
  EncodedInstruction out_;
};

// Everything after the prefixes that a ModRM-carrying instruction needs.
struct ModRm {
  std::uint8_t modrm = 0;
  std::optional<std::uint8_t> sib;
  std::size_t disp_size = 0;
  std::int64_t disp = 0;
  bool rex_r = false, rex_x = false, rex_b = false;
  Segment segment = Segment::none;
  bool needs_rex_for_byte_reg = false;
  bool uses_high_byte = false;
};

void note_byte_register(ModRm& m, const Register& r) {
  if (r.width != Width::b8) return;
  if (r.high_byte) m.uses_high_byte = true;
  else if (r.number() >= 4) m.needs_rex_for_byte_reg = true;
}

ModRm modrm_register(const SubsetInstruction& instr, std::uint8_t reg_field, bool reg_ext,
                     const Register& rm) {
  (void)instr;
  ModRm m;
  m.modrm = static_cast<std::uint8_t>(0xc0 | ((reg_field & 7) << 3) | rm.low3());
  m.rex_r = reg_ext;
  m.rex_b = rm.extended();
  note_byte_register(m, rm);
  return m;
}

std::uint8_t scale_bits(const SubsetInstruction& instr, std::uint8_t scale) {
  switch (scale) {
    case 1: return 0;
    case 2: return 1;
    case 4: return 2;
    case 8: return 3;
    default: unsupported(instr, "invalid scale " + std::to_string(scale));
  }
}

ModRm modrm_memory(const SubsetInstruction& instr, std::uint8_t reg_field, bool reg_ext,
                   const Memory& mem) {
  ModRm m;
  m.rex_r = reg_ext;
  m.segment = mem.segment;
  const bool symbolic = !mem.symbol.empty();
  const std::uint8_t reg_bits = static_cast<std::uint8_t>((reg_field & 7) << 3);

  if (mem.base && mem.base->width != Width::b64)
    unsupported(instr, "only 64-bit base registers are supported");
  if (mem.index && mem.index->width != Width::b64)
    unsupported(instr, "only 64-bit index registers are supported");
  if (mem.index && mem.index->gpr == Gpr::rsp) unsupported(instr, "%rsp cannot be an index");
  if (!symbolic && !fits_int32(mem.disp)) unsupported(instr, "displacement exceeds 32 bits");

  if (mem.rip_relative) {
    if (mem.base || mem.index) unsupported(instr, "rip-relative with base/index");
    m.modrm = static_cast<std::uint8_t>(0x05 | reg_bits);
    m.disp_size = 4;
    m.disp = symbolic ? 0 : mem.disp;
    return m;
  }

  if (!mem.base) {
    // Absolute or index-only: SIB with base=101 and mandatory disp32.
    m.modrm = static_cast<std::uint8_t>(0x04 | reg_bits);
    std::uint8_t index_bits = 4 << 3;
    std::uint8_t ss = 0;
    if (mem.index) {
      index_bits = static_cast<std::uint8_t>(mem.index->low3() << 3);
      m.rex_x = mem.index->extended();
      ss = scale_bits(instr, mem.scale);
    }
    m.sib = static_cast<std::uint8_t>((ss << 6) | index_bits | 5);
    m.disp_size = 4;
    m.disp = symbolic ? 0 : mem.disp;
    return m;
  }

  const Register& base = *mem.base;
  m.rex_b = base.extended();
  std::uint8_t mod;
  if (symbolic) {
    mod = 2;
    m.disp_size = 4;
    m.disp = 0;
  } else if (mem.disp == 0 && base.low3() != 5) {
    mod = 0;
  } else if (fits_int8(mem.disp)) {
    mod = 1;
    m.disp_size = 1;
    m.disp = mem.disp;
  } else {
    mod = 2;
    m.disp_size = 4;
    m.disp = mem.disp;
  }

  if (mem.index || base.low3() == 4) {
    std::uint8_t index_bits = 4 << 3;
    std::uint8_t ss = 0;
    if (mem.index) {
      index_bits = static_cast<std::uint8_t>(mem.index->low3() << 3);
      m.rex_x = mem.index->extended();
      ss = scale_bits(instr, mem.scale);
    }
    m.modrm = static_cast<std::uint8_t>((mod << 6) | reg_bits | 4);
    m.sib = static_cast<std::uint8_t>((ss << 6) | index_bits | base.low3());
  } else {
    m.modrm = static_cast<std::uint8_t>((mod << 6) | reg_bits | base.low3());
  }
  return m;
}

ModRm modrm_for(const SubsetInstruction& instr, std::uint8_t reg_field, bool reg_ext,
                const Operand& rm) {
  if (auto* r = std::get_if<Register>(&rm)) return modrm_register(instr, reg_field, reg_ext, *r);
  if (auto* m = std::get_if<Memory>(&rm)) return modrm_memory(instr, reg_field, reg_ext, *m);
  unsupported(instr, "immediate cannot be a ModRM operand");
}

// Emits: segment, operand-size, REX, opcode, ModRM, SIB, displacement.
void emit_modrm_instruction(Builder& b, const SubsetInstruction& instr, ModRm m,
                            std::uint8_t opcode, bool rex_w) {
  if (m.segment == Segment::fs) b.byte(0x64);
  if (m.segment == Segment::gs) b.byte(0x65);
  if (instr.width == Width::b16) b.byte(0x66);
  const bool need_rex =
      rex_w || m.rex_r || m.rex_x || m.rex_b || m.needs_rex_for_byte_reg;
  if (need_rex && m.uses_high_byte)
    unsupported(instr, "high-byte register cannot be combined with a REX prefix");
  if (need_rex) {
    b.byte(static_cast<std::uint8_t>(0x40 | (rex_w ? 8 : 0) | (m.rex_r ? 4 : 0) |
                                     (m.rex_x ? 2 : 0) | (m.rex_b ? 1 : 0)));
  }
  b.byte(opcode);
  b.byte(m.modrm);
  if (m.sib) b.byte(*m.sib);
  b.little_endian(static_cast<std::uint64_t>(m.disp), m.disp_size);
}

const Register& require_register(const SubsetInstruction& instr, const std::optional<Operand>& op,
                                 const char* role) {
  if (!op || !std::holds_alternative<Register>(*op))
    unsupported(instr, std::string(role) + " must be a register");
  return std::get<Register>(*op);
}

void check_width(const SubsetInstruction& instr, const Register& r) {
  if (r.width != instr.width) unsupported(instr, "register width does not match operand size");
}

std::optional<std::uint8_t> alu_digit(Mnemonic op) {
  switch (op) {
    case Mnemonic::add: return 0;
    case Mnemonic::or_: return 1;
    case Mnemonic::and_: return 4;
    case Mnemonic::sub: return 5;
    case Mnemonic::xor_: return 6;
    case Mnemonic::cmp: return 7;
    default: return std::nullopt;
  }
}

bool is_accumulator(const Operand& op) {
  auto* r = std::get_if<Register>(&op);
  return r && r->gpr == Gpr::rax && !r->high_byte;
}

void check_operand_widths(const SubsetInstruction& instr) {
  for (const auto* op : {&instr.dst, &instr.src}) {
    if (*op && std::holds_alternative<Register>(**op))
      check_width(instr, std::get<Register>(**op));
  }
}

EncodedInstruction encode_plain(const SubsetInstruction& instr, std::uint8_t opcode) {
  if (instr.dst || instr.src) unsupported(instr, "takes no operands");
  Builder b(instr);
  b.byte(opcode);
  return b.done();
}

EncodedInstruction encode_push_pop(const SubsetInstruction& instr, std::uint8_t base) {
  const auto& operand = instr.op == Mnemonic::push ? instr.src : instr.dst;
  const Register& r = require_register(instr, operand, "operand");
  if (r.width != Width::b64) unsupported(instr, "only 64-bit push/pop are in the table");
  Builder b(instr);
  if (r.extended()) b.byte(0x41);
  b.byte(static_cast<std::uint8_t>(base + r.low3()));
  return b.done();
}

// Writes the immediate of an instruction whose immediate width follows the
// operand size (imm8/imm16/imm32, imm32 sign-extended at 64).
void emit_sized_immediate(Builder& b, Width w, std::int64_t v) {
  b.little_endian(static_cast<std::uint64_t>(v), w == Width::b64 ? 4 : bytes(w));
}

EncodedInstruction encode_mov(const SubsetInstruction& instr) {
  if (!instr.dst || !instr.src) unsupported(instr, "mov needs two operands");
  check_operand_widths(instr);
  const Operand& dst = *instr.dst;
  const Operand& src = *instr.src;
  const bool w64 = instr.width == Width::b64;
  const bool byte_op = instr.width == Width::b8;
  Builder b(instr);

  if (auto* imm = std::get_if<Immediate>(&src)) {
    if (!immediate_fits(imm->value, instr.width))
      unsupported(instr, "immediate out of range (use movabs for imm64)");
    if (auto* r = std::get_if<Register>(&dst)) {
      if (w64) {
        emit_modrm_instruction(b, instr, modrm_register(instr, 0, false, *r), 0xc7, true);
        emit_sized_immediate(b, instr.width, imm->value);
        return b.done();
      }
      if (instr.width == Width::b16) b.byte(0x66);
      if (r->high_byte && r->needs_rex()) unsupported(instr, "bad register");
      if (r->needs_rex()) b.byte(static_cast<std::uint8_t>(0x40 | (r->extended() ? 1 : 0)));
      std::uint8_t opcode = byte_op ? 0xb0 : 0xb8;
      std::uint8_t low = r->high_byte ? static_cast<std::uint8_t>(4 + r->low3()) : r->low3();
      b.byte(static_cast<std::uint8_t>(opcode + low));
      emit_sized_immediate(b, instr.width, imm->value);
      return b.done();
    }
    emit_modrm_instruction(b, instr, modrm_for(instr, 0, false, dst), byte_op ? 0xc6 : 0xc7, w64);
    emit_sized_immediate(b, instr.width, imm->value);
    return b.done();
  }

  if (auto* r = std::get_if<Register>(&src)) {
    ModRm m = modrm_for(instr, r->low3(), r->extended(), dst);
    note_byte_register(m, *r);
    emit_modrm_instruction(b, instr, m, byte_op ? 0x88 : 0x89, w64);
    return b.done();
  }

  // Load form: mov m -> r.
  const Register& r = require_register(instr, instr.dst, "destination of a load");
  ModRm m = modrm_for(instr, r.low3(), r.extended(), src);
  note_byte_register(m, r);
  emit_modrm_instruction(b, instr, m, byte_op ? 0x8a : 0x8b, w64);
  return b.done();
}

EncodedInstruction encode_movabs(const SubsetInstruction& instr) {
  const Register& r = require_register(instr, instr.dst, "movabs destination");
  if (instr.width != Width::b64 || r.width != Width::b64)
    unsupported(instr, "movabs is 64-bit only");
  if (!instr.src || !std::holds_alternative<Immediate>(*instr.src))
    unsupported(instr, "movabs takes an immediate source");
  Builder b(instr);
  b.byte(static_cast<std::uint8_t>(0x48 | (r.extended() ? 1 : 0)));
  b.byte(static_cast<std::uint8_t>(0xb8 + r.low3()));
  b.little_endian(static_cast<std::uint64_t>(std::get<Immediate>(*instr.src).value), 8);
  return b.done();
}

EncodedInstruction encode_alu(const SubsetInstruction& instr, std::uint8_t digit) {
  if (!instr.dst || !instr.src) unsupported(instr, "needs two operands");
  check_operand_widths(instr);
  const Operand& dst = *instr.dst;
  const Operand& src = *instr.src;
  if (std::holds_alternative<Immediate>(dst)) unsupported(instr, "destination is an immediate");
  const bool w64 = instr.width == Width::b64;
  const bool byte_op = instr.width == Width::b8;
  Builder b(instr);

  if (auto* imm = std::get_if<Immediate>(&src)) {
    if (!immediate_fits(imm->value, instr.width)) unsupported(instr, "immediate out of range");
    const std::int64_t sx = sign_extend(imm->value, instr.width);
    if (byte_op) {
      if (is_accumulator(dst)) {
        b.byte(static_cast<std::uint8_t>(digit * 8 + 4));
        b.byte(static_cast<std::uint8_t>(imm->value));
        return b.done();
      }
      emit_modrm_instruction(b, instr, modrm_for(instr, digit, false, dst), 0x80, false);
      b.byte(static_cast<std::uint8_t>(imm->value));
      return b.done();
    }
    if (fits_int8(sx)) {
      emit_modrm_instruction(b, instr, modrm_for(instr, digit, false, dst), 0x83, w64);
      b.byte(static_cast<std::uint8_t>(sx));
      return b.done();
    }
    if (is_accumulator(dst)) {
      if (instr.width == Width::b16) b.byte(0x66);
      if (w64) b.byte(0x48);
      b.byte(static_cast<std::uint8_t>(digit * 8 + 5));
      emit_sized_immediate(b, instr.width, imm->value);
      return b.done();
    }
    emit_modrm_instruction(b, instr, modrm_for(instr, digit, false, dst), 0x81, w64);
    emit_sized_immediate(b, instr.width, imm->value);
    return b.done();
  }

  const Register& r = require_register(instr, instr.src, "source");
  ModRm m = modrm_for(instr, r.low3(), r.extended(), dst);
  note_byte_register(m, r);
  emit_modrm_instruction(b, instr, m, static_cast<std::uint8_t>(digit * 8 + (byte_op ? 0 : 1)),
                         w64);
  return b.done();
}

EncodedInstruction encode_test(const SubsetInstruction& instr) {
  if (!instr.dst || !instr.src) unsupported(instr, "needs two operands");
  check_operand_widths(instr);
  const Operand& dst = *instr.dst;
  const Operand& src = *instr.src;
  if (std::holds_alternative<Immediate>(dst)) unsupported(instr, "destination is an immediate");
  const bool w64 = instr.width == Width::b64;
  const bool byte_op = instr.width == Width::b8;
  Builder b(instr);

  if (auto* imm = std::get_if<Immediate>(&src)) {
    if (!immediate_fits(imm->value, instr.width)) unsupported(instr, "immediate out of range");
    if (is_accumulator(dst)) {
      if (instr.width == Width::b16) b.byte(0x66);
      if (w64) b.byte(0x48);
      b.byte(byte_op ? 0xa8 : 0xa9);
      emit_sized_immediate(b, instr.width, imm->value);
      return b.done();
    }
    emit_modrm_instruction(b, instr, modrm_for(instr, 0, false, dst), byte_op ? 0xf6 : 0xf7, w64);
    emit_sized_immediate(b, instr.width, imm->value);
    return b.done();
  }

  const Register& r = require_register(instr, instr.src, "source");
  ModRm m = modrm_for(instr, r.low3(), r.extended(), dst);
  note_byte_register(m, r);
  emit_modrm_instruction(b, instr, m, byte_op ? 0x84 : 0x85, w64);
  return b.done();
}

EncodedInstruction encode_lea(const SubsetInstruction& instr) {
  const Register& r = require_register(instr, instr.dst, "lea destination");
  if (instr.width != Width::b64 || r.width != Width::b64) unsupported(instr, "lea is 64-bit only");
  if (!instr.src || !std::holds_alternative<Memory>(*instr.src))
    unsupported(instr, "lea takes a memory source");
  const Memory& mem = std::get<Memory>(*instr.src);
  if (mem.segment != Segment::none) unsupported(instr, "lea ignores segments");
  Builder b(instr);
  emit_modrm_instruction(b, instr, modrm_memory(instr, r.low3(), r.extended(), mem), 0x8d, true);
  return b.done();
}

}  // namespace

bool immediate_fits(std::int64_t value, Width w) {
  switch (w) {
    case Width::b8: return value >= -128 && value <= 255;
    case Width::b16: return value >= -32768 && value <= 65535;
    case Width::b32:
      return value >= std::numeric_limits<std::int32_t>::min() &&
             value <= static_cast<std::int64_t>(std::numeric_limits<std::uint32_t>::max());
    case Width::b64: return fits_int32(value);
  }
  return false;
}

EncodedInstruction encode(const SubsetInstruction& instr) {
  switch (instr.op) {
    case Mnemonic::nop: return encode_plain(instr, 0x90);
    case Mnemonic::ret: return encode_plain(instr, 0xc3);
    case Mnemonic::pushfq: return encode_plain(instr, 0x9c);
    case Mnemonic::popfq: return encode_plain(instr, 0x9d);
    case Mnemonic::push: return encode_push_pop(instr, 0x50);
    case Mnemonic::pop: return encode_push_pop(instr, 0x58);
    case Mnemonic::mov: return encode_mov(instr);
    case Mnemonic::movabs: return encode_movabs(instr);
    case Mnemonic::test: return encode_test(instr);
    case Mnemonic::lea: return encode_lea(instr);
    default: break;
  }
  if (auto digit = alu_digit(instr.op)) return encode_alu(instr, *digit);
  unsupported(instr, "not in the encoder table");
}

std::vector<std::uint8_t> encode_all(std::span<const SubsetInstruction> seq) {
  std::vector<std::uint8_t> out;
  for (const auto& instr : seq) {
    auto enc = encode(instr);
    auto bytes = enc.bytes();
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

}  // namespace ropscrub::isa
