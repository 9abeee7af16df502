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

#include "ropscrub/isa/registers.hpp"

#include <array>

namespace ropscrub::isa {

namespace {

constexpr std::array<std::string_view, 16> kNames64 = {
    "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
    "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15"};
constexpr std::array<std::string_view, 16> kNames32 = {
    "eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi",
    "r8d", "r9d", "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"};
constexpr std::array<std::string_view, 16> kNames16 = {
    "ax", "cx", "dx", "bx", "sp", "bp", "si", "di",
    "r8w", "r9w", "r10w", "r11w", "r12w", "r13w", "r14w", "r15w"};
constexpr std::array<std::string_view, 16> kNames8 = {
    "al", "cl", "dl", "bl", "spl", "bpl", "sil", "dil",
    "r8b", "r9b", "r10b", "r11b", "r12b", "r13b", "r14b", "r15b"};
constexpr std::array<std::string_view, 4> kHighNames = {"ah", "ch", "dh", "bh"};

}  // namespace

std::optional<Width> width_from_bits(unsigned b) {
  switch (b) {
    case 8: return Width::b8;
    case 16: return Width::b16;
    case 32: return Width::b32;
    case 64: return Width::b64;
    default: return std::nullopt;
  }
}

char suffix(Width w) {
  switch (w) {
    case Width::b8: return 'b';
    case Width::b16: return 'w';
    case Width::b32: return 'l';
    case Width::b64: return 'q';
  }
  return '?';
}

std::optional<Width> width_from_suffix(char c) {
  switch (c) {
    case 'b': return Width::b8;
    case 'w': return Width::b16;
    case 'l': return Width::b32;
    case 'q': return Width::b64;
    default: return std::nullopt;
  }
}

std::optional<Register> parse_register(std::string_view name) {
  for (std::size_t i = 0; i < 16; ++i) {
    auto g = static_cast<Gpr>(i);
    if (name == kNames64[i]) return Register{g, Width::b64};
    if (name == kNames32[i]) return Register{g, Width::b32};
    if (name == kNames16[i]) return Register{g, Width::b16};
    if (name == kNames8[i]) return Register{g, Width::b8};
  }
  // gas also accepts r8l..r15l for the low byte.
  if (name.size() >= 3 && name.back() == 'l' && name.front() == 'r') {
    auto base = name.substr(0, name.size() - 1);
    for (std::size_t i = 8; i < 16; ++i)
      if (base == kNames64[i]) return Register{static_cast<Gpr>(i), Width::b8};
  }
  for (std::size_t i = 0; i < 4; ++i)
    if (name == kHighNames[i]) return Register{static_cast<Gpr>(i), Width::b8, true};
  return std::nullopt;
}

std::string register_name(const Register& r) {
  auto n = r.number();
  if (r.high_byte) return std::string(kHighNames[n & 3]);
  switch (r.width) {
    case Width::b8: return std::string(kNames8[n]);
    case Width::b16: return std::string(kNames16[n]);
    case Width::b32: return std::string(kNames32[n]);
    case Width::b64: return std::string(kNames64[n]);
  }
  return "?";
}

}  // namespace ropscrub::isa
