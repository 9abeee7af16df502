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

#include "ropscrub/isa/decoder.hpp"

#include <algorithm>

#include "ropscrub/isa/encoder.hpp"
#include "ropscrub/isa/registers.hpp"

namespace ropscrub::isa {

namespace {

bool is_legacy_prefix(std::uint8_t b) {
  switch (b) {
    case 0x26: case 0x2e: case 0x36: case 0x3e: case 0x64: case 0x65:
    case 0x66: case 0x67: case 0xf0: case 0xf2: case 0xf3:
      return true;
    default:
      return false;
  }
}

bool is_rex(std::uint8_t b) { return (b & 0xf0) == 0x40; }

constexpr std::string_view kEndbr64 = "endbr64";
constexpr std::string_view kEndbr32 = "endbr32";
constexpr std::string_view kPause = "pause";

}  // namespace

std::string DecodeResult::summary() const {
  std::string out(mnemonic);
  if (opcode_register >= 0) {
    Register r;
    r.gpr = static_cast<Gpr>(opcode_register);
    r.width = width_from_bits(register_width).value_or(Width::b64);
    // Without REX, byte registers 4-7 are ah, ch, dh, bh.
    if (r.width == Width::b8 && !rex && opcode_register >= 4) {
      r.gpr = static_cast<Gpr>(opcode_register - 4);
      r.high_byte = true;
    }
    out += ' ';
    out += register_name(r);
  }
  return out;
}

DecodeResult LengthDecoder::decode(std::span<const std::uint8_t> bytes, std::size_t offset) const {
  if (offset >= bytes.size()) return DecodeResult::undecodable();
  const std::size_t limit = std::min(bytes.size(), offset + kMaxInstructionLength);
  std::size_t pos = offset;

  bool operand16 = false, address32 = false, rep = false;
  while (pos < limit && is_legacy_prefix(bytes[pos])) {
    switch (bytes[pos]) {
      case 0x66: operand16 = true; break;
      case 0x67: address32 = true; break;
      case 0xf3: rep = true; break;
      default: break;
    }
    ++pos;
  }
  if (pos >= limit) return DecodeResult::undecodable();

  std::uint8_t rex = 0;
  if (is_rex(bytes[pos])) {
    rex = bytes[pos++];
    // A REX that does not immediately precede the opcode is ignored by the
    // CPU and rendered inconsistently by disassemblers; stay out of it.
    if (pos >= limit || is_legacy_prefix(bytes[pos]) || is_rex(bytes[pos]))
      return DecodeResult::undecodable();
  }
  const bool rex_w = rex & 0x08;
  const bool rex_b = rex & 0x01;

  OpcodeMap map = OpcodeMap::one_byte;
  std::uint8_t opcode = bytes[pos++];
  if (opcode == 0x0f) {
    if (pos >= limit) return DecodeResult::undecodable();
    opcode = bytes[pos++];
    map = OpcodeMap::two_byte;
    if (opcode == 0x38 || opcode == 0x3a) {
      map = opcode == 0x38 ? OpcodeMap::three_byte_38 : OpcodeMap::three_byte_3a;
      if (pos >= limit) return DecodeResult::undecodable();
      opcode = bytes[pos++];
    }
  }

  std::optional<std::uint8_t> digit;
  if (table_->keyed_by_digit(map, opcode)) {
    if (pos >= limit) return DecodeResult::undecodable();
    digit = static_cast<std::uint8_t>((bytes[pos] >> 3) & 7);
  }
  const OpcodeEntry* entry = table_->lookup(map, opcode, digit);
  if (!entry) return DecodeResult::undecodable();

  std::string_view mnemonic = entry->mnemonic;
  if (entry->has_modrm) {
    if (pos >= limit) return DecodeResult::undecodable();
    const std::uint8_t modrm = bytes[pos++];
    const std::uint8_t mod = modrm >> 6;
    const std::uint8_t rm = modrm & 7;
    if (map == OpcodeMap::two_byte && opcode == 0x1e && rep && (modrm == 0xfa || modrm == 0xfb))
      mnemonic = modrm == 0xfa ? kEndbr64 : kEndbr32;
    std::size_t disp = 0;
    if (mod != 3) {
      if (rm == 4) {
        if (pos >= limit) return DecodeResult::undecodable();
        const std::uint8_t sib = bytes[pos++];
        if (mod == 0 && (sib & 7) == 5) disp = 4;
      }
      if (mod == 0 && rm == 5) disp = 4;
      if (mod == 1) disp = 1;
      if (mod == 2) disp = 4;
    }
    pos += disp;
  }

  std::size_t imm = 0;
  switch (entry->immediate) {
    case ImmediateSize::none: break;
    case ImmediateSize::imm8: imm = 1; break;
    case ImmediateSize::imm16: imm = 2; break;
    case ImmediateSize::imm32: imm = 4; break;
    case ImmediateSize::imm64: imm = 8; break;
    case ImmediateSize::operand_z: imm = (operand16 && !rex_w) ? 2 : 4; break;
    case ImmediateSize::operand_v: imm = rex_w ? 8 : (operand16 ? 2 : 4); break;
    case ImmediateSize::moffs: imm = address32 ? 4 : 8; break;
    case ImmediateSize::enter: imm = 3; break;
    case ImmediateSize::rel32:
      if (operand16 && !rex_w) return DecodeResult::undecodable();
      imm = 4;
      break;
  }
  pos += imm;

  if (pos > limit || pos - offset > kMaxInstructionLength) return DecodeResult::undecodable();

  DecodeResult result;
  result.length = static_cast<std::uint8_t>(pos - offset);
  result.flow = entry->flow;
  result.mnemonic = mnemonic;
  result.rex = rex != 0;
  if (map == OpcodeMap::one_byte && opcode == 0x90 && rep && !rex_b) result.mnemonic = kPause;
  if (entry->register_in_opcode) {
    result.opcode_register = static_cast<std::int8_t>((opcode & 7) | (rex_b ? 8 : 0));
    if (map == OpcodeMap::one_byte && (opcode & 0xf8) == 0x50) result.register_width = 64;
    else if (map == OpcodeMap::one_byte && (opcode & 0xf8) == 0x58) result.register_width = 64;
    else if (map == OpcodeMap::one_byte && (opcode & 0xf8) == 0xb0) result.register_width = 8;
    else result.register_width = rex_w ? 64 : (operand16 ? 16 : 32);
  }
  return result;
}

DecodeResult decode_length(std::span<const std::uint8_t> bytes, std::size_t offset) {
  static const LengthDecoder decoder{OpcodeTable::active()};
  return decoder.decode(bytes, offset);
}

}  // namespace ropscrub::isa
