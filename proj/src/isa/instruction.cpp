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

#include "ropscrub/isa/instruction.hpp"

#include <cstdio>

namespace ropscrub::isa {

std::string_view base_name(Mnemonic m) {
  switch (m) {
    case Mnemonic::mov: return "mov";
    case Mnemonic::movabs: return "movabs";
    case Mnemonic::add: return "add";
    case Mnemonic::sub: return "sub";
    case Mnemonic::and_: return "and";
    case Mnemonic::or_: return "or";
    case Mnemonic::xor_: return "xor";
    case Mnemonic::cmp: return "cmp";
    case Mnemonic::test: return "test";
    case Mnemonic::push: return "push";
    case Mnemonic::pop: return "pop";
    case Mnemonic::pushfq: return "pushfq";
    case Mnemonic::popfq: return "popfq";
    case Mnemonic::nop: return "nop";
    case Mnemonic::ret: return "ret";
    case Mnemonic::lea: return "lea";
  }
  return "?";
}

SubsetInstruction make_nop() { return {Mnemonic::nop, Width::b64, {}, {}}; }
SubsetInstruction make_ret() { return {Mnemonic::ret, Width::b64, {}, {}}; }
SubsetInstruction make_pushfq() { return {Mnemonic::pushfq, Width::b64, {}, {}}; }
SubsetInstruction make_popfq() { return {Mnemonic::popfq, Width::b64, {}, {}}; }

SubsetInstruction make_push(Gpr g) {
  return {Mnemonic::push, Width::b64, {}, Operand{reg(g)}};
}

SubsetInstruction make_pop(Gpr g) {
  return {Mnemonic::pop, Width::b64, Operand{reg(g)}, {}};
}

SubsetInstruction make_mov_seg(Segment seg, std::int64_t disp, Gpr dst) {
  Memory m;
  m.segment = seg;
  m.disp = disp;
  return {Mnemonic::mov, Width::b64, Operand{reg(dst)}, Operand{m}};
}

SubsetInstruction make_xor_stack_top(Gpr src) {
  Memory m;
  m.base = reg(Gpr::rsp);
  return {Mnemonic::xor_, Width::b64, Operand{m}, Operand{reg(src)}};
}

SubsetInstruction make_adjust_rsp(std::int64_t disp) {
  Memory m;
  m.base = reg(Gpr::rsp);
  m.disp = disp;
  return {Mnemonic::lea, Width::b64, Operand{reg(Gpr::rsp)}, Operand{m}};
}

SubsetInstruction make_binary(Mnemonic op, Width w, Operand dst, Operand src) {
  return {op, w, std::move(dst), std::move(src)};
}

namespace {

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_disp(std::int64_t disp) {
  if (disp < 0) return "-" + hex(static_cast<std::uint64_t>(-(disp + 1)) + 1);
  return hex(static_cast<std::uint64_t>(disp));
}

}  // namespace

std::string format_memory(const Memory& mem) {
  std::string out;
  if (mem.segment == Segment::fs) out += "%fs:";
  if (mem.segment == Segment::gs) out += "%gs:";
  if (!mem.symbol.empty()) {
    out += mem.symbol;
    if (mem.disp > 0) out += "+" + std::to_string(mem.disp);
    if (mem.disp < 0) out += std::to_string(mem.disp);
  } else if (mem.disp != 0 || (!mem.base && !mem.index && !mem.rip_relative)) {
    out += format_disp(mem.disp);
  }
  if (mem.rip_relative) {
    out += "(%rip)";
  } else if (mem.base || mem.index) {
    out += "(";
    if (mem.base) out += "%" + register_name(*mem.base);
    if (mem.index) {
      out += ",%" + register_name(*mem.index);
      out += "," + std::to_string(mem.scale);
    }
    out += ")";
  }
  return out;
}

std::string format_operand(const Operand& op) {
  if (auto* r = std::get_if<Register>(&op)) return "%" + register_name(*r);
  if (auto* m = std::get_if<Memory>(&op)) return format_memory(*m);
  auto v = std::get<Immediate>(op).value;
  if (v < 0) return "$" + std::to_string(v);
  return "$" + hex(static_cast<std::uint64_t>(v));
}

std::string format_att(const SubsetInstruction& instr) {
  std::string name(base_name(instr.op));
  switch (instr.op) {
    case Mnemonic::nop:
    case Mnemonic::ret:
    case Mnemonic::pushfq:
    case Mnemonic::popfq:
      return name;
    case Mnemonic::push:
      return "pushq\t" + format_operand(*instr.src);
    case Mnemonic::pop:
      return "popq\t" + format_operand(*instr.dst);
    default:
      break;
  }
  name += suffix(instr.width);
  if (instr.op == Mnemonic::movabs) {
    auto bits = static_cast<std::uint64_t>(std::get<Immediate>(*instr.src).value);
    return name + "\t$" + hex(bits) + ", " + format_operand(*instr.dst);
  }
  return name + "\t" + format_operand(*instr.src) + ", " + format_operand(*instr.dst);
}

}  // namespace ropscrub::isa
