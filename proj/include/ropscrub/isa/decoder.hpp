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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "ropscrub/isa/opcode_table.hpp"

namespace ropscrub::isa {

/// Outcome of decoding one instruction. `length == 0` means Undecodable;
/// a decoded result always has 1 <= length <= 15.
struct DecodeResult {
  std::uint8_t length = 0;
  Flow flow = Flow::sequential;
  std::string_view mnemonic;     // points into the opcode table
  std::int8_t opcode_register = -1;  // for +r opcodes, with REX.B applied
  std::uint8_t register_width = 64;
  bool rex = false;

  bool decoded() const { return length != 0; }
  /// Coarse text, e.g. "push rdi", "xor", "ret imm16".
  std::string summary() const;

  static DecodeResult undecodable() { return {}; }
};

/// Table-driven x86-64 length decoder: legacy prefixes, REX, the one-byte
/// map, a common subset of the 0f map, the 0f38/0f3a maps, and the ModRM,
/// SIB, displacement and immediate length rules. Everything else, including
/// VEX/EVEX, is Undecodable. Never reports a wrong length for an opcode
/// present in its table.
class LengthDecoder {
 public:
  explicit LengthDecoder(const OpcodeTable& table = OpcodeTable::active()) : table_(&table) {}

  DecodeResult decode(std::span<const std::uint8_t> bytes, std::size_t offset) const;

 private:
  const OpcodeTable* table_;
};

/// Convenience wrapper over LengthDecoder with the active table. Offsets at
/// or past the end of `bytes` are Undecodable.
DecodeResult decode_length(std::span<const std::uint8_t> bytes, std::size_t offset);

}  // namespace ropscrub::isa
