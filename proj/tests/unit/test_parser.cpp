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

#include <doctest.h>

#include <filesystem>

#include "ropscrub/error.hpp"
#include "ropscrub/io/binary_io.hpp"
#include "ropscrub/rewrite/parser.hpp"
#include "support.hpp"

using namespace ropscrub;
using namespace ropscrub::rewrite;
using testsupport::fixture;

namespace {

const char* kLeafAdd =
    "\t.globl\tadd\n"
    "\t.type\tadd, @function\n"
    "add:\n"
    "\tpushq\t%rbp\n"
    "\tmovq\t%rsp, %rbp\n"
    "\tmovl\t%edi, -4(%rbp)\n"
    "\tmovl\t%esi, -8(%rbp)\n"
    "\tmovl\t-4(%rbp), %edx\n"
    "\tmovl\t-8(%rbp), %eax\n"
    "\taddl\t%edx, %eax\n"
    "\tpopq\t%rbp\n"
    "\tret\n"
    "\t.size\tadd, .-add\n";

std::vector<std::filesystem::path> corpus() {
  std::vector<std::filesystem::path> out;
  for (const char* dir : {"asm", "hand"})
    for (const auto& e : std::filesystem::directory_iterator(fixture(dir))) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("leaf add body is one function with a ret") {
  auto parsed = parse_assembly(kLeafAdd);
  auto fns = parsed.functions();
  REQUIRE(fns.size() == 1);
  CHECK(fns[0]->name == "add");
  CHECK(fns[0]->has_ret);
  CHECK_FALSE(fns[0]->calls_setjmp_family);
  CHECK(fns[0]->tail_jumps.empty());
  std::size_t instructions = 0;
  for (const auto& r : fns[0]->body) instructions += r.kind == RecordKind::instruction;
  CHECK(instructions == 9);
}

TEST_CASE("empty and data-only input") {
  auto empty = parse_assembly("");
  CHECK(empty.functions().empty());
  CHECK(empty.render().empty());

  const auto text = io::read_text_file(fixture("hand/data_only.s"));
  auto parsed = parse_assembly(text);
  CHECK(parsed.functions().empty());
  for (const auto& part : parsed.parts)
    for (const auto& r : std::get<Interlude>(part).records)
      CHECK((r.kind == RecordKind::directive || r.kind == RecordKind::blank ||
             r.kind == RecordKind::label));
}

TEST_CASE("rendering an untouched parse reproduces the file byte for byte") {
  for (const auto& path : corpus()) {
    CAPTURE(path.filename().string());
    const auto text = io::read_text_file(path);
    CHECK(parse_assembly(text).render() == text);
  }
  CHECK(parse_assembly("\tret").render() == "\tret");
  CHECK(parse_assembly("\n\n").render() == "\n\n");
}

TEST_CASE("integers") {
  CHECK(parse_integer("0xc3") == 0xc3);
  CHECK(parse_integer("-0x80") == -0x80);
  CHECK(parse_integer("195") == 195);
  CHECK(parse_integer("0b11000011") == 0xc3);
  CHECK(parse_integer("0303") == 0xc3);
  CHECK(parse_integer("0xffffffffffffffff") == -1);
  CHECK_FALSE(parse_integer("foo").has_value());
  CHECK_FALSE(parse_integer("").has_value());
}

TEST_CASE("operands") {
  auto imm = parse_operand("$0xc3");
  REQUIRE(imm);
  CHECK(std::get<isa::Immediate>(*imm).value == 0xc3);

  auto r = parse_operand("%r11d");
  REQUIRE(r);
  CHECK(std::get<isa::Register>(*r) == isa::reg(isa::Gpr::r11, isa::Width::b32));

  auto m = parse_operand("-0x10(%rbp,%rcx,4)");
  REQUIRE(m);
  const auto& mem = std::get<isa::Memory>(*m);
  CHECK(mem.disp == -0x10);
  CHECK(mem.base == isa::reg(isa::Gpr::rbp));
  CHECK(mem.index == isa::reg(isa::Gpr::rcx));
  CHECK(mem.scale == 4);

  auto fsload = parse_operand("%fs:40");
  REQUIRE(fsload);
  CHECK(std::get<isa::Memory>(*fsload).segment == isa::Segment::fs);
  CHECK(std::get<isa::Memory>(*fsload).disp == 40);

  auto rip = parse_operand("counter(%rip)");
  REQUIRE(rip);
  CHECK(std::get<isa::Memory>(*rip).rip_relative);
  CHECK(std::get<isa::Memory>(*rip).symbol == "counter");

  // Symbolic immediates and vector registers are carried as text.
  CHECK(std::holds_alternative<OtherOperand>(*parse_operand("$table+8")));
  CHECK(std::holds_alternative<OtherOperand>(*parse_operand("%xmm0")));
}

TEST_CASE("comments and strings") {
  auto parsed = parse_assembly(
      "f:\n"
      "\tmovl $1, %eax # ret c3\n"
      "\t/* ret */ ret\n"
      "\t.string \"a # b\"\n");
  std::vector<InstructionRecord> records;
  for (const auto& part : parsed.parts) {
    if (auto* i = std::get_if<Interlude>(&part)) records.insert(records.end(), i->records.begin(), i->records.end());
    if (auto* f = std::get_if<FunctionSpan>(&part)) records.insert(records.end(), f->body.begin(), f->body.end());
  }
  REQUIRE(records.size() == 4);
  CHECK(records[1].mnemonic == "movl");
  CHECK(records[1].operands.size() == 2);
  CHECK(records[2].mnemonic == "ret");
  CHECK(records[3].kind == RecordKind::directive);

  CHECK_THROWS_AS(parse_assembly("\t.string \"open\n"), Error);
  CHECK_THROWS_AS(parse_assembly("/* never closed\n\tret\n"), Error);
}

TEST_CASE("several statements on one line stay opaque") {
  auto parsed = parse_assembly("f:\n\tnop; ret\n");
  auto fns = parsed.functions();
  REQUIRE(fns.size() == 1);
  bool opaque = false;
  for (const auto& r : fns[0]->body) opaque = opaque || r.kind == RecordKind::opaque;
  CHECK(opaque);
}

TEST_CASE("tail jumps and setjmp callers") {
  auto parsed = parse_assembly(
      "\t.type f, @function\n"
      "f:\n"
      "\ttestl %edi, %edi\n"
      "\tje .L2\n"
      "\tjmp g\n"
      ".L2:\n"
      "\tcall _setjmp@PLT\n"
      "\tjmp *%rax\n"
      "\tret\n"
      "\t.size f, .-f\n");
  auto fns = parsed.functions();
  REQUIRE(fns.size() == 1);
  CHECK(fns[0]->calls_setjmp_family);
  CHECK(fns[0]->tail_jumps.size() == 2);
  for (auto i : fns[0]->tail_jumps) CHECK(fns[0]->body[i].mnemonic == "jmp");
}

TEST_CASE("jump-table dispatch is not a tail jump") {
  auto parsed = parse_assembly(
      "\t.type f, @function\n"
      "f:\n"
      "\tjmp *%rax\n"
      "\t.section .rodata\n"
      ".L4:\n"
      "\t.long .L3-.L4\n"
      "\t.text\n"
      ".L3:\n"
      "\tret\n"
      "\t.size f, .-f\n");
  auto fns = parsed.functions();
  REQUIRE(fns.size() == 1);
  CHECK(fns[0]->tail_jumps.empty());
}

TEST_CASE("every corpus file parses into functions with names") {
  for (const auto& path : corpus()) {
    CAPTURE(path.filename().string());
    auto parsed = parse_assembly(io::read_text_file(path));
    for (const auto* f : parsed.functions()) CHECK_FALSE(f->name.empty());
  }
}
