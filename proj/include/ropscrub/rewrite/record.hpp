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
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ropscrub/isa/instruction.hpp"

namespace ropscrub::rewrite {

enum class RecordKind {
  blank,        // empty or comment-only line
  directive,    // .section, .long, sym = expr, ...
  label,        // label(s) with no statement
  instruction,
  opaque,       // looks like an instruction but could not be parsed
};

/// Operand text the rewriter keeps but does not interpret: branch targets,
/// indirect operands (`*%rax`), symbolic immediates, non-GPR registers.
struct OtherOperand {
  std::string text;
  friend bool operator==(const OtherOperand&, const OtherOperand&) = default;
};

using AsmOperand = std::variant<isa::Register, isa::Immediate, isa::Memory, OtherOperand>;

/// One source line, or one instruction inserted by a pass.
struct InstructionRecord {
  RecordKind kind = RecordKind::blank;
  std::vector<std::string> labels;
  std::vector<std::string> prefixes;   // rep, lock, notrack, ...
  std::string mnemonic;                // lower-case, as written
  std::vector<AsmOperand> operands;    // AT&T order: sources first
  std::string raw;                     // the source line, verbatim
  std::string statement;               // text after the labels, comment included
  std::string code;                    // statement with comments stripped
  std::size_t line = 0;                // 1-based; 0 for inserted records
  bool synthesized = false;
  bool labels_moved = false;           // labels now live on an earlier record

  bool is_code() const {
    return kind == RecordKind::instruction || kind == RecordKind::opaque;
  }
  /// Output text; one line unless labels were attached to an inserted record.
  std::string render() const;
};

InstructionRecord make_synthesized(const isa::SubsetInstruction& instr);

struct FunctionSpan {
  std::string name;
  std::vector<InstructionRecord> body;
  bool has_ret = false;
  bool calls_setjmp_family = false;
  std::vector<std::size_t> tail_jumps;   // indices into body
  std::vector<std::string> warnings;

  /// Recomputes has_ret, calls_setjmp_family and tail_jumps from the body.
  void analyze();
};

/// Records outside any function: file prelude, data, and what sits between
/// function bodies.
struct Interlude {
  std::vector<InstructionRecord> records;
};

struct ParsedAssembly {
  std::vector<std::variant<Interlude, FunctionSpan>> parts;
  bool trailing_newline = true;

  std::vector<FunctionSpan*> functions();
  std::vector<const FunctionSpan*> functions() const;
  std::string render() const;
};

// Mnemonic classification shared by the parser and the passes.
bool is_ret_family(std::string_view mnemonic);
bool is_unconditional_jump(std::string_view mnemonic);
bool is_conditional_jump(std::string_view mnemonic);
bool is_call(std::string_view mnemonic);
bool is_setjmp_family(std::string_view symbol);
/// Strips @PLT and similar decorations from a branch target.
std::string_view branch_symbol(std::string_view target);
bool is_local_label(std::string_view name);

}  // namespace ropscrub::rewrite
