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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ropscrub/isa/instruction.hpp"

namespace ropscrub::isa {

inline constexpr std::size_t kMaxInstructionLength = 15;

struct EncodedInstruction {
  std::array<std::uint8_t, kMaxInstructionLength> storage{};
  std::size_t length = 0;
  // Line of the assembly record this encoding stands for, when known.
  std::optional<std::size_t> source_line;

  std::span<const std::uint8_t> bytes() const { return {storage.data(), length}; }
};

/// Encodes one instruction from the subset table, choosing the same form the
/// GNU assembler picks for the equivalent AT&T text (sign-extended imm8
/// where it fits, accumulator short forms, disp8 over disp32, ...), so that
/// the bytes predicted here are the bytes that end up in the binary.
///
/// The table, with dst/src in semantic order:
///
///   nop, ret, pushfq, popfq                       no operands
///   push r64 / pop r64                            50+r / 58+r
///   lea  r64 <- m                                 REX.W 8d /r
///   mov  r   <- imm                               b0+r, b8+r, REX.W c7 /0 (sx imm32)
///   movabs r64 <- imm64                           REX.W b8+r io
///   mov  m   <- imm                               c6 /0, c7 /0
///   mov  r/m <- r                                 88 / 89
///   mov  r   <- m                                 8a / 8b   (includes fs/gs loads)
///   add/or/and/sub/xor/cmp  r/m <- imm            80, 81, 83, acc short forms
///   add/or/and/sub/xor/cmp  r/m <- r              00..39 MR forms
///   test r/m <- imm                               f6 /0, f7 /0, a8, a9
///   test r/m <- r                                 84 / 85
///
/// Memory operands take 64-bit base/index registers, rip-relative or
/// absolute addressing and an optional fs/gs override. Anything else throws
/// Error{UnsupportedInstruction}.
EncodedInstruction encode(const SubsetInstruction& instr);

/// Concatenated encoding of a sequence.
std::vector<std::uint8_t> encode_all(std::span<const SubsetInstruction> seq);

/// True when `value` is representable as an immediate of the given width
/// (accepting both signed and unsigned spellings for 8/16/32, and only the
/// sign-extended imm32 range for 64 since only movabs takes imm64).
bool immediate_fits(std::int64_t value, Width w);

}  // namespace ropscrub::isa
