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
#include <string_view>

namespace ropscrub::isa {

/// Hardware numbering of the 16 general-purpose registers.
enum class Gpr : std::uint8_t {
  rax, rcx, rdx, rbx, rsp, rbp, rsi, rdi,
  r8, r9, r10, r11, r12, r13, r14, r15,
};

enum class Width : std::uint8_t { b8 = 8, b16 = 16, b32 = 32, b64 = 64 };

constexpr unsigned bits(Width w) { return static_cast<unsigned>(w); }
constexpr unsigned bytes(Width w) { return bits(w) / 8; }
std::optional<Width> width_from_bits(unsigned bits);
/// AT&T mnemonic suffix: b, w, l, q.
char suffix(Width w);
std::optional<Width> width_from_suffix(char c);

struct Register {
  Gpr gpr = Gpr::rax;
  Width width = Width::b64;
  // ah, ch, dh, bh: legacy high-byte forms, not encodable alongside REX.
  bool high_byte = false;

  constexpr std::uint8_t number() const { return static_cast<std::uint8_t>(gpr); }
  constexpr std::uint8_t low3() const { return number() & 7; }
  constexpr bool extended() const { return number() >= 8; }
  // spl, bpl, sil, dil are only reachable with a REX prefix.
  constexpr bool needs_rex() const {
    return extended() || (width == Width::b8 && !high_byte && number() >= 4);
  }

  friend bool operator==(const Register&, const Register&) = default;
};

constexpr Register reg(Gpr g, Width w = Width::b64) { return Register{g, w, false}; }

/// Parses a register name without the leading '%'. Only general-purpose
/// registers are recognised.
std::optional<Register> parse_register(std::string_view name);
/// Name without '%'.
std::string register_name(const Register& r);

}  // namespace ropscrub::isa
