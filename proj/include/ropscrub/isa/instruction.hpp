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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "ropscrub/isa/registers.hpp"

namespace ropscrub::isa {

enum class Segment : std::uint8_t { none, fs, gs };

/// An x86-64 memory operand: seg:disp(base, index, scale).
///
/// A non-empty `symbol` means the displacement is a link-time expression
/// (e.g. `counter(%rip)`, `table+8`). Its bytes are a relocation the
/// assembler leaves as zeros, which is how the encoder renders it.
struct Memory {
  Segment segment = Segment::none;
  std::optional<Register> base;
  std::optional<Register> index;
  std::uint8_t scale = 1;
  std::int64_t disp = 0;
  std::string symbol;
  bool rip_relative = false;

  bool uses(Gpr g) const {
    return (base && base->gpr == g) || (index && index->gpr == g);
  }
  friend bool operator==(const Memory&, const Memory&) = default;
};

struct Immediate {
  std::int64_t value = 0;
  friend bool operator==(const Immediate&, const Immediate&) = default;
};

using Operand = std::variant<Register, Memory, Immediate>;

enum class Mnemonic : std::uint8_t {
  mov, movabs, add, sub, and_, or_, xor_, cmp, test,
  push, pop, pushfq, popfq, nop, ret, lea,
};

std::string_view base_name(Mnemonic m);

/// One instruction from the encoder's finite table. `dst` and `src` are in
/// semantic order (destination first); AT&T text reverses them.
struct SubsetInstruction {
  Mnemonic op = Mnemonic::nop;
  Width width = Width::b64;
  std::optional<Operand> dst;
  std::optional<Operand> src;

  friend bool operator==(const SubsetInstruction&, const SubsetInstruction&) = default;
};

// Shorthands for the instructions the rewriter emits.
SubsetInstruction make_nop();
SubsetInstruction make_ret();
SubsetInstruction make_pushfq();
SubsetInstruction make_popfq();
SubsetInstruction make_push(Gpr g);
SubsetInstruction make_pop(Gpr g);
/// mov seg:disp -> reg64 (canary load).
SubsetInstruction make_mov_seg(Segment seg, std::int64_t disp, Gpr dst);
/// xor reg64 -> (%rsp), i.e. into the word on top of the stack.
SubsetInstruction make_xor_stack_top(Gpr src);
/// lea disp(%rsp), %rsp
SubsetInstruction make_adjust_rsp(std::int64_t disp);
SubsetInstruction make_binary(Mnemonic op, Width w, Operand dst, Operand src);

/// AT&T assembly text, with a width suffix on every sized mnemonic so the
/// assembler never has to guess. Example: "addq\t$0x61, %r8".
std::string format_att(const SubsetInstruction& instr);
std::string format_operand(const Operand& op);
std::string format_memory(const Memory& mem);

}  // namespace ropscrub::isa
