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

#include "ropscrub/isa/forbidden.hpp"

#include "ropscrub/error.hpp"

namespace ropscrub {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedInstruction: return "UnsupportedInstruction";
    case ErrorCode::NoCleanSplit: return "NoCleanSplit";
    case ErrorCode::ScratchExhausted: return "ScratchExhausted";
    case ErrorCode::MalformedSource: return "MalformedSource";
    case ErrorCode::AlreadyRewritten: return "AlreadyRewritten";
    case ErrorCode::RewriteFailed: return "RewriteFailed";
    case ErrorCode::SectionMismatch: return "SectionMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NotElf: return "NotElf";
    case ErrorCode::UnsupportedClass: return "UnsupportedClass";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace ropscrub

namespace ropscrub::isa {

namespace {
constexpr std::array<std::uint8_t, 5> kForbidden = {0xc2, 0xc3, 0xca, 0xcb, 0xcf};
}

std::uint8_t opcode_byte(FreeBranchKind kind) {
  switch (kind) {
    case FreeBranchKind::Ret: return 0xc3;
    case FreeBranchKind::RetImm16: return 0xc2;
    case FreeBranchKind::RetFar: return 0xcb;
    case FreeBranchKind::RetFarImm16: return 0xca;
    case FreeBranchKind::IRet: return 0xcf;
  }
  return 0;
}

std::optional<FreeBranchKind> free_branch_kind(std::uint8_t byte) {
  switch (byte) {
    case 0xc3: return FreeBranchKind::Ret;
    case 0xc2: return FreeBranchKind::RetImm16;
    case 0xcb: return FreeBranchKind::RetFar;
    case 0xca: return FreeBranchKind::RetFarImm16;
    case 0xcf: return FreeBranchKind::IRet;
    default: return std::nullopt;
  }
}

std::string_view to_string(FreeBranchKind kind) {
  switch (kind) {
    case FreeBranchKind::Ret: return "ret";
    case FreeBranchKind::RetImm16: return "ret_imm16";
    case FreeBranchKind::RetFar: return "retf";
    case FreeBranchKind::RetFarImm16: return "retf_imm16";
    case FreeBranchKind::IRet: return "iret";
  }
  return "?";
}

std::optional<FreeBranchKind> free_branch_kind_from_string(std::string_view name) {
  for (auto kind : kAllFreeBranchKinds)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

std::span<const std::uint8_t> forbidden_bytes() { return kForbidden; }

std::vector<ForbiddenHit> contains_forbidden(std::span<const std::uint8_t> bytes) {
  std::vector<ForbiddenHit> hits;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (auto kind = free_branch_kind(bytes[i])) hits.push_back({i, *kind});
  }
  return hits;
}

}  // namespace ropscrub::isa
