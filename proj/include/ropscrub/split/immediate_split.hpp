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
#include <span>
#include <string>
#include <vector>

#include "ropscrub/isa/instruction.hpp"

namespace ropscrub::split {

/// Scratch registers tried in order. r10 and r11 are left out: the ModRM
/// byte of `add $imm, %r10` / `%r11` is 0xc2 / 0xc3.
std::span<const isa::Gpr> default_scratch_order();

/// Bytes below %rsp that the emitted sequence steps over before pushing.
/// The SysV ABI lets leaf functions keep live data there.
inline constexpr std::int64_t kDefaultRedZone = 128;

struct SplitRequest {
  /// For width 8/16/32 the value of the immediate field (either signed or
  /// unsigned spelling). For width 64 with `sign_extended` the sign-extended
  /// 64-bit value of an imm32; without it, a full imm64 (movabs only).
  std::int64_t value = 0;
  isa::Width width = isa::Width::b32;
  bool sign_extended = false;
  /// The instruction being replaced, immediate included. Its destination is
  /// a register or a memory operand.
  isa::SubsetInstruction context;
  std::vector<isa::Gpr> scratch_order{default_scratch_order().begin(),
                                      default_scratch_order().end()};
  std::int64_t red_zone = kDefaultRedZone;
};

struct SplitPlan {
  // Immediate field values of the two parts. Unsigned for widths 8/16/32,
  // signed imm32 for sign-extended 64, raw 64-bit pattern for imm64.
  std::int64_t part_a = 0;
  std::int64_t part_b = 0;
  isa::Width width = isa::Width::b32;
  bool sign_extended = false;
  std::optional<isa::Register> scratch;
  std::vector<isa::SubsetInstruction> emitted;
  std::optional<std::string> warning;
};

/// Number of bytes the immediate field occupies: 1/2/4 for widths 8/16/32,
/// 4 for sign-extended 64, 8 for imm64.
std::size_t immediate_field_size(isa::Width width, bool sign_extended);

/// Little-endian rendering of the low `size` bytes of `value`.
std::vector<std::uint8_t> render_immediate(std::int64_t value, std::size_t size);

/// True iff the little-endian rendering of the low `width_bits` of `value`
/// holds a ret-family byte.
bool needs_split(std::uint64_t value, unsigned width_bits);

/// Splits the immediate of `req.context` into two parts whose wrap-around
/// sum is the original value, and builds the replacement sequence
///
///   [lea -red_zone(%rsp), %rsp]
///   push   scratch
///   pushfq
///   mov    $part_a, scratch
///   add    $part_b, scratch
///   popfq
///   <op>   scratch, <original destination>
///   pop    scratch
///   [lea +red_zone(%rsp), %rsp]
///
/// such that neither part and no emitted byte is a ret-family byte. Memory
/// destinations based on %rsp get their displacement moved past the push
/// and the red-zone skip. The imm64 form (movabs) loads both parts with
/// movabs and adds them register to register instead.
///
/// A clean immediate gets a trivial plan (part_a = value, part_b = 0, the
/// context unchanged) with a warning. Throws Error{NoCleanSplit} when the
/// part search is exhausted and Error{ScratchExhausted} when no scratch
/// register yields a clean sequence.
SplitPlan split_immediate(const SplitRequest& req);

}  // namespace ropscrub::split
