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

#include "ropscrub/isa/opcode_table.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "ropscrub/error.hpp"

namespace ropscrub::isa {

namespace {

constexpr std::string_view kBuiltinTable =
#include "opcode_table_data.inc"
    ;

[[noreturn]] void bad_line(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::InvalidArgument,
              "opcode table line " + std::to_string(line) + ": " + why);
}

std::optional<std::uint8_t> parse_hex_byte(std::string_view s) {
  unsigned v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size() || v > 0xff) return std::nullopt;
  return static_cast<std::uint8_t>(v);
}

std::optional<ImmediateSize> parse_immediate(std::string_view s) {
  if (s == "0") return ImmediateSize::none;
  if (s == "1") return ImmediateSize::imm8;
  if (s == "2") return ImmediateSize::imm16;
  if (s == "4") return ImmediateSize::imm32;
  if (s == "8") return ImmediateSize::imm64;
  if (s == "z") return ImmediateSize::operand_z;
  if (s == "v") return ImmediateSize::operand_v;
  if (s == "a") return ImmediateSize::moffs;
  if (s == "e") return ImmediateSize::enter;
  if (s == "r") return ImmediateSize::rel32;
  return std::nullopt;
}

std::optional<OpcodeMap> parse_map(std::string_view s) {
  if (s == "1") return OpcodeMap::one_byte;
  if (s == "0f") return OpcodeMap::two_byte;
  if (s == "0f38") return OpcodeMap::three_byte_38;
  if (s == "0f3a") return OpcodeMap::three_byte_3a;
  return std::nullopt;
}

Flow classify_flow(std::string_view mnemonic) {
  if (mnemonic == "ret" || mnemonic == "ret imm16" || mnemonic == "retf" ||
      mnemonic == "retf imm16" || mnemonic == "iret")
    return Flow::free_branch;
  if (mnemonic == "jmp" || mnemonic == "jmpf") return Flow::jump;
  if (mnemonic == "call" || mnemonic == "callf") return Flow::call;
  return Flow::sequential;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

OpcodeTable OpcodeTable::parse(std::string_view text) {
  OpcodeTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 6) bad_line(line_no, "expected 6+ fields");

    auto map = parse_map(fields[0]);
    if (!map) bad_line(line_no, "unknown map '" + std::string(fields[0]) + "'");

    std::string_view opcode_field = fields[1];
    std::optional<std::uint8_t> digit;
    if (auto slash = opcode_field.find('/'); slash != std::string_view::npos) {
      auto d = opcode_field.substr(slash + 1);
      if (d.size() != 1 || d[0] < '0' || d[0] > '7') bad_line(line_no, "bad /digit");
      digit = static_cast<std::uint8_t>(d[0] - '0');
      opcode_field = opcode_field.substr(0, slash);
    }
    std::uint8_t first, last;
    if (auto dash = opcode_field.find('-'); dash != std::string_view::npos) {
      auto lo = parse_hex_byte(opcode_field.substr(0, dash));
      auto hi = parse_hex_byte(opcode_field.substr(dash + 1));
      if (!lo || !hi || *lo > *hi) bad_line(line_no, "bad opcode range");
      first = *lo;
      last = *hi;
    } else {
      auto op = parse_hex_byte(opcode_field);
      if (!op) bad_line(line_no, "bad opcode");
      first = last = *op;
    }

    OpcodeEntry entry;
    if (fields[2] == "y") entry.has_modrm = true;
    else if (fields[2] != "n") bad_line(line_no, "modrm must be y or n");
    auto imm = parse_immediate(fields[3]);
    if (!imm) bad_line(line_no, "bad immediate size");
    entry.immediate = *imm;
    if (fields[4] != "-") {
      std::string_view flags = fields[4];
      std::size_t start = 0;
      while (start <= flags.size()) {
        auto comma = flags.find(',', start);
        if (comma == std::string_view::npos) comma = flags.size();
        auto flag = flags.substr(start, comma - start);
        if (flag == "r") entry.register_in_opcode = true;
        else bad_line(line_no, "unknown flag '" + std::string(flag) + "'");
        start = comma + 1;
      }
    }
    if (digit && !entry.has_modrm) bad_line(line_no, "/digit requires a ModRM byte");
    std::string mnemonic;
    for (std::size_t i = 5; i < fields.size(); ++i) {
      if (!mnemonic.empty()) mnemonic += ' ';
      mnemonic += fields[i];
    }
    entry.flow = classify_flow(mnemonic);
    entry.mnemonic = std::move(mnemonic);

    auto& slots = table.maps_[static_cast<std::size_t>(*map)];
    for (unsigned op = first; op <= last; ++op) {
      Slot& slot = slots[op];
      if (digit) {
        if (slot.whole) bad_line(line_no, "opcode already has a whole-opcode entry");
        if (slot.by_digit[*digit]) bad_line(line_no, "duplicate entry");
        slot.keyed = true;
        slot.by_digit[*digit] = entry;
      } else {
        if (slot.whole || slot.keyed) bad_line(line_no, "duplicate entry");
        slot.whole = entry;
      }
      ++table.entries_;
    }
  }
  return table;
}

OpcodeTable OpcodeTable::from_file(const std::string& path) { return parse(read_file(path)); }

const OpcodeTable& OpcodeTable::builtin() {
  static const OpcodeTable table = parse(kBuiltinTable);
  return table;
}

const OpcodeTable& OpcodeTable::active() {
  static const OpcodeTable& table = []() -> const OpcodeTable& {
    if (const char* dir = std::getenv("ROPSCRUB_DATA_DIR"); dir && *dir) {
      static const OpcodeTable loaded = from_file(std::string(dir) + "/opcodes.tbl");
      return loaded;
    }
    return builtin();
  }();
  return table;
}

bool OpcodeTable::keyed_by_digit(OpcodeMap map, std::uint8_t opcode) const {
  return maps_[static_cast<std::size_t>(map)][opcode].keyed;
}

const OpcodeEntry* OpcodeTable::lookup(OpcodeMap map, std::uint8_t opcode,
                                       std::optional<std::uint8_t> digit) const {
  const Slot& slot = maps_[static_cast<std::size_t>(map)][opcode];
  if (slot.keyed) {
    if (!digit) return nullptr;
    const auto& e = slot.by_digit[*digit & 7];
    return e ? &*e : nullptr;
  }
  return slot.whole ? &*slot.whole : nullptr;
}

}  // namespace ropscrub::isa
