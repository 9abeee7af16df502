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
#include <string_view>
#include <vector>

namespace ropscrub::isa {

/// The ret-family free branches. Each is a single opcode byte, so any
/// occurrence of one of these bytes anywhere in a code stream is a potential
/// gadget terminator.
enum class FreeBranchKind : std::uint8_t { Ret, RetImm16, RetFar, RetFarImm16, IRet };

inline constexpr std::array<FreeBranchKind, 5> kAllFreeBranchKinds = {
    FreeBranchKind::Ret, FreeBranchKind::RetImm16, FreeBranchKind::RetFar,
    FreeBranchKind::RetFarImm16, FreeBranchKind::IRet};

std::uint8_t opcode_byte(FreeBranchKind kind);
std::optional<FreeBranchKind> free_branch_kind(std::uint8_t byte);

/// Stable identifier used in JSON reports ("ret", "ret_imm16", ...).
std::string_view to_string(FreeBranchKind kind);
std::optional<FreeBranchKind> free_branch_kind_from_string(std::string_view name);

/// {0xc3, 0xc2, 0xcb, 0xca, 0xcf}, ascending.
std::span<const std::uint8_t> forbidden_bytes();

inline bool is_forbidden(std::uint8_t byte) {
  return byte == 0xc3 || byte == 0xc2 || byte == 0xcb || byte == 0xca || byte == 0xcf;
}

struct ForbiddenHit {
  std::size_t offset;
  FreeBranchKind kind;

  friend bool operator==(const ForbiddenHit&, const ForbiddenHit&) = default;
};

std::vector<ForbiddenHit> contains_forbidden(std::span<const std::uint8_t> bytes);

inline bool is_clean(std::span<const std::uint8_t> bytes) {
  for (auto b : bytes)
    if (is_forbidden(b)) return false;
  return true;
}

}  // namespace ropscrub::isa
