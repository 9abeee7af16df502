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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ropscrub::isa {

enum class OpcodeMap : std::uint8_t { one_byte, two_byte, three_byte_38, three_byte_3a };

/// How many immediate bytes follow the ModRM/SIB/displacement.
enum class ImmediateSize : std::uint8_t {
  none, imm8, imm16, imm32, imm64,
  operand_z,   // imm16 under 0x66, else imm32
  operand_v,   // imm64 under REX.W, imm16 under 0x66, else imm32
  moffs,       // 8, or 4 under 0x67
  enter,       // iw + ib
  rel32,       // 4; rejected under 0x66
};

/// Coarse control-flow class, derived from the mnemonic at load time.
enum class Flow : std::uint8_t { sequential, free_branch, jump, call };

struct OpcodeEntry {
  bool has_modrm = false;
  ImmediateSize immediate = ImmediateSize::none;
  bool register_in_opcode = false;
  Flow flow = Flow::sequential;
  std::string mnemonic;
};

/// Opcode table loaded from the text format documented in data/opcodes.tbl.
/// Immutable after construction; safe to share between threads.
class OpcodeTable {
 public:
  /// Throws Error{InvalidArgument} naming the offending line.
  static OpcodeTable parse(std::string_view text);
  static OpcodeTable from_file(const std::string& path);

  /// The table compiled into the library.
  static const OpcodeTable& builtin();
  /// The process-wide table: $ROPSCRUB_DATA_DIR/opcodes.tbl when that
  /// variable is set, otherwise builtin(). Resolved once, on first use.
  static const OpcodeTable& active();

  /// True when the entry for this opcode depends on ModRM.reg.
  bool keyed_by_digit(OpcodeMap map, std::uint8_t opcode) const;
  /// nullptr when the opcode (or opcode/digit) is not in the table.
  const OpcodeEntry* lookup(OpcodeMap map, std::uint8_t opcode,
                            std::optional<std::uint8_t> digit = std::nullopt) const;
  std::size_t entry_count() const { return entries_; }

 private:
  struct Slot {
    std::optional<OpcodeEntry> whole;
    std::array<std::optional<OpcodeEntry>, 8> by_digit;
    bool keyed = false;
  };

  std::array<std::array<Slot, 256>, 4> maps_{};
  std::size_t entries_ = 0;
};

}  // namespace ropscrub::isa
