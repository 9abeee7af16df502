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

#include "ropscrub/rewrite/record.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace ropscrub::rewrite {

namespace {

constexpr std::array<std::string_view, 15> kRetFamily = {
    "ret", "retq", "retl", "retw", "lret", "lretq", "lretl", "lretw",
    "retf", "retfq", "iret", "iretq", "iretl", "iretw", "iretd"};

constexpr std::array<std::string_view, 11> kSetjmpFamily = {
    "setjmp", "_setjmp", "__setjmp", "sigsetjmp", "__sigsetjmp", "longjmp",
    "_longjmp", "siglongjmp", "__longjmp_chk", "getcontext", "swapcontext"};

}  // namespace

bool is_ret_family(std::string_view m) {
  return std::find(kRetFamily.begin(), kRetFamily.end(), m) != kRetFamily.end();
}

bool is_unconditional_jump(std::string_view m) { return m == "jmp" || m == "jmpq"; }

bool is_conditional_jump(std::string_view m) {
  if (m.size() < 2 || m[0] != 'j' || is_unconditional_jump(m)) return false;
  return true;
}

bool is_call(std::string_view m) { return m == "call" || m == "callq"; }

bool is_setjmp_family(std::string_view symbol) {
  return std::find(kSetjmpFamily.begin(), kSetjmpFamily.end(), branch_symbol(symbol)) !=
         kSetjmpFamily.end();
}

std::string_view branch_symbol(std::string_view target) {
  if (auto at = target.find('@'); at != std::string_view::npos) target = target.substr(0, at);
  return target;
}

bool is_local_label(std::string_view name) {
  if (name.starts_with(".L")) return true;
  // Numeric local labels and their references: 1, 1f, 2b.
  if (!name.empty() && std::isdigit(static_cast<unsigned char>(name[0]))) return true;
  return false;
}

std::string InstructionRecord::render() const {
  if (!synthesized && !labels_moved) return raw;
  std::string out;
  for (const auto& l : labels) out += l + ":\n";
  if (!statement.empty()) out += "\t" + statement;
  else if (!out.empty()) out.pop_back();
  return out;
}

InstructionRecord make_synthesized(const isa::SubsetInstruction& instr) {
  InstructionRecord r;
  r.kind = RecordKind::instruction;
  r.statement = isa::format_att(instr);
  r.code = r.statement;
  r.mnemonic = r.statement.substr(0, r.statement.find('\t'));
  r.synthesized = true;
  return r;
}

void FunctionSpan::analyze() {
  has_ret = false;
  calls_setjmp_family = false;
  tail_jumps.clear();

  std::set<std::string, std::less<>> own_labels;
  bool has_jump_table = false;
  for (const auto& r : body) {
    own_labels.insert(r.labels.begin(), r.labels.end());
    if (r.kind == RecordKind::directive) {
      // .long .L5-.L4 / .quad .L7: switch tables dispatched by jmp *reg.
      auto s = std::string_view(r.code);
      if ((s.starts_with(".long") || s.starts_with(".quad")) && s.find(".L") != s.npos)
        has_jump_table = true;
    }
  }

  for (std::size_t i = 0; i < body.size(); ++i) {
    const auto& r = body[i];
    if (r.kind != RecordKind::instruction) continue;
    if (is_ret_family(r.mnemonic)) has_ret = true;
    const bool jump = is_unconditional_jump(r.mnemonic);
    if ((jump || is_call(r.mnemonic)) && r.operands.size() == 1) {
      if (auto* target = std::get_if<OtherOperand>(&r.operands[0])) {
        std::string_view t = target->text;
        if (!t.starts_with("*") && is_setjmp_family(t)) calls_setjmp_family = true;
        if (jump) {
          if (t.starts_with("*")) {
            // Indirect: a switch dispatch when the body carries a jump table,
            // otherwise a sibling call through a pointer.
            bool via_got = t.find("@GOTPCREL") != t.npos;
            if (via_got || !has_jump_table) tail_jumps.push_back(i);
          } else {
            auto sym = branch_symbol(t);
            if (!is_local_label(sym) && !own_labels.contains(sym)) tail_jumps.push_back(i);
          }
        }
      }
    }
  }
}

std::vector<FunctionSpan*> ParsedAssembly::functions() {
  std::vector<FunctionSpan*> out;
  for (auto& p : parts)
    if (auto* f = std::get_if<FunctionSpan>(&p)) out.push_back(f);
  return out;
}

std::vector<const FunctionSpan*> ParsedAssembly::functions() const {
  std::vector<const FunctionSpan*> out;
  for (const auto& p : parts)
    if (auto* f = std::get_if<FunctionSpan>(&p)) out.push_back(f);
  return out;
}

std::string ParsedAssembly::render() const {
  std::string out;
  bool first = true;
  auto emit = [&](const InstructionRecord& r) {
    if (!first) out += '\n';
    out += r.render();
    first = false;
  };
  for (const auto& p : parts) {
    if (auto* i = std::get_if<Interlude>(&p)) {
      for (const auto& r : i->records) emit(r);
    } else {
      for (const auto& r : std::get<FunctionSpan>(p).body) emit(r);
    }
  }
  if (!first && trailing_newline) out += '\n';
  return out;
}

}  // namespace ropscrub::rewrite
