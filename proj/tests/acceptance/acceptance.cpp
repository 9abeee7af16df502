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

// Acceptance checks. One PASS/FAIL/SKIP line per criterion; exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ropscrub/error.hpp"
#include "ropscrub/io/binary_io.hpp"
#include "ropscrub/isa/decoder.hpp"
#include "ropscrub/isa/encoder.hpp"
#include "ropscrub/isa/forbidden.hpp"
#include "ropscrub/rewrite/passes.hpp"
#include "ropscrub/rewrite/rewriter.hpp"
#include "ropscrub/scan/report.hpp"
#include "ropscrub/split/immediate_split.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ropscrub;
using namespace ropscrub::isa;
using testsupport::fixture;
using testsupport::quote;

namespace {

struct Outcome {
  enum { pass, fail, skip } status = pass;
  std::string detail;
};

class Log {
 public:
  void fail(const std::string& why) {
    if (failures_++ < 8) detail_ << (detail_.tellp() ? "; " : "") << why;
  }
  bool ok() const { return failures_ == 0; }
  Outcome outcome(const std::string& summary) const {
    if (ok()) return {Outcome::pass, summary};
    return {Outcome::fail, summary + " | " + std::to_string(failures_) + " failure(s): " + detail_.str()};
  }

 private:
  std::size_t failures_ = 0;
  std::ostringstream detail_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fs", s);
  return buf;
}

std::vector<fs::path> corpus() {
  std::vector<fs::path> out;
  for (const char* dir : {"asm", "hand"})
    for (const auto& e : fs::directory_iterator(fixture(dir)))
      if (e.path().extension() == ".s") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- 1

Outcome overlapping_decode() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::uint8_t> bytes = {0x41, 0x33, 0x57, 0x30, 0xc0, 0xc2, 0x05, 0xc3};
  Log log;

  std::vector<std::size_t> fb;
  for (const auto& h : contains_forbidden(bytes)) fb.push_back(h.offset);
  if (fb != std::vector<std::size_t>{5, 7}) log.fail("free-branch offsets are not {5,7}");

  const scan::SectionIdentity id{"flat", 0, 0, bytes.size()};
  auto r = scan::summarize(id, bytes, {});
  if (r.total_free_branch_bytes != 2) log.fail("total_free_branch_bytes != 2");

  const auto sweep = scan::linear_boundaries(bytes, 0);
  if (sweep.starts() != std::vector<std::size_t>{0, 4, 7}) log.fail("linear sweep is not {0,4,7}");

  scan::ScanOptions opts;
  opts.dedupe = false;
  auto gs = scan::classify(scan::enumerate_gadgets(bytes, opts), &sweep);
  bool unaligned = false, aligned = false;
  for (const auto& g : gs) {
    if (g.start_offset == 2 && g.instructions.size() == 3 && g.instructions[0].starts_with("push") &&
        g.instructions[1].starts_with("xor") && g.kind == FreeBranchKind::RetImm16 &&
        g.alignment == scan::Alignment::unaligned)
      unaligned = true;
    if (g.start_offset == 0 && g.alignment == scan::Alignment::aligned) aligned = true;
  }
  if (!unaligned) log.fail("no unaligned push/xor/ret-imm16 gadget at offset 2");
  if (!aligned) log.fail("sweep-start gadget not aligned");

  const double s = seconds_since(t0);
  if (s >= 1.0) log.fail("took " + fmt(s));
  return log.outcome(std::to_string(gs.size()) + " gadgets, " + fmt(s));
}

// ---------------------------------------------------------------- 2

bool clean_le(std::uint64_t v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (is_forbidden(static_cast<std::uint8_t>(v >> (8 * i)))) return false;
  return true;
}

Outcome split_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  Log log;
  std::mt19937_64 rng(20260417);
  const Mnemonic ops[] = {Mnemonic::mov, Mnemonic::add, Mnemonic::sub, Mnemonic::and_,
                          Mnemonic::or_, Mnemonic::xor_, Mnemonic::cmp, Mnemonic::test};
  const Gpr dsts[] = {Gpr::rax, Gpr::rbx, Gpr::rcx, Gpr::rdx, Gpr::rsi, Gpr::rdi, Gpr::rbp, Gpr::r8,
                      Gpr::r9,  Gpr::r10, Gpr::r11, Gpr::r12, Gpr::r13, Gpr::r14, Gpr::r15};

  auto check = [&](std::int64_t value, Width w, Mnemonic op, Gpr dst) {
    split::SplitRequest req;
    req.value = value;
    req.width = w;
    req.context = make_binary(op, w, Operand{reg(dst, w)}, Operand{Immediate{value}});
    const unsigned bits_w = bits(w);
    const std::uint64_t m = (1ull << bits_w) - 1;
    try {
      auto plan = split::split_immediate(req);
      const auto a = static_cast<std::uint64_t>(plan.part_a), b = static_cast<std::uint64_t>(plan.part_b);
      if (((a + b) & m) != (static_cast<std::uint64_t>(value) & m)) log.fail("sum law");
      if (!clean_le(a, bits_w / 8) || !clean_le(b, bits_w / 8)) log.fail("dirty part");
      if (!is_clean(encode_all(plan.emitted))) log.fail("dirty emission");
      return plan;
    } catch (const Error& e) {
      log.fail(std::string("split threw: ") + e.what());
      return split::SplitPlan{};
    }
  };

  std::size_t tried = 0;
  for (Width w : {Width::b8, Width::b16, Width::b32}) {
    const std::uint64_t m = (1ull << bits(w)) - 1;
    for (int i = 0; i < 100000; ++i) {
      std::uint64_t v;
      do v = rng() & m;
      while (!split::needs_split(v, bits(w)));
      check(static_cast<std::int64_t>(v), w, ops[rng() % 8], dsts[rng() % 15]);
      ++tried;
    }
  }

  auto p1 = check(0xc3, Width::b8, Mnemonic::mov, Gpr::rax);
  if (p1.part_a + p1.part_b != 0xc3) log.fail("0xc3 plan");
  auto p2 = check(0x2ac385, Width::b32, Mnemonic::add, Gpr::rax);
  if (p2.part_a == 0x1561c2 || p2.part_b == 0x1561c2 || p2.part_a == 0x1561c3 || p2.part_b == 0x1561c3)
    log.fail("0x2ac385 used a naive half");

  const double s = seconds_since(t0);
  if (s >= 30.0) log.fail("took " + fmt(s));
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu immediates; 0xc3 -> (0x%llx, 0x%llx); ", tried,
                static_cast<unsigned long long>(p1.part_a), static_cast<unsigned long long>(p1.part_b));
  return log.outcome(buf + fmt(s));
}

// ---------------------------------------------------------------- 3

Outcome self_cleanliness() {
  const auto t0 = std::chrono::steady_clock::now();
  Log log;
  std::size_t encoded = 0;
  auto expect_clean = [&](const std::vector<SubsetInstruction>& seq) {
    ++encoded;
    try {
      if (!is_clean(encode_all(seq))) {
        std::string text;
        for (const auto& in : seq) text += format_att(in) + "; ";
        log.fail("dirty: " + text);
      }
    } catch (const Error& e) {
      log.fail(std::string("unencodable: ") + e.what());
    }
  };

  rewrite::RewriteOptions opts;
  for (Gpr key : {opts.key_register, opts.key_fallback}) expect_clean(rewrite::canary_pair(opts, key));
  expect_clean(std::vector<SubsetInstruction>(16, make_nop()));
  expect_clean({make_adjust_rsp(-split::kDefaultRedZone), make_adjust_rsp(split::kDefaultRedZone),
                make_pushfq(), make_popfq()});

  // Scaffolding around every scratch candidate, at every width, with clean
  // parts that pick each immediate encoding form.
  const std::int64_t parts[] = {0, 1, 0x7f, -0x80, -1, 0x100, 0x7fff, 0x12345678, -0x10000000};
  for (Gpr s : split::default_scratch_order()) {
    expect_clean({make_push(s), make_pop(s)});
    for (Width w : {Width::b8, Width::b16, Width::b32, Width::b64}) {
      for (std::int64_t p : parts) {
        if (!immediate_fits(p, w)) continue;
        expect_clean({make_binary(Mnemonic::mov, w, Operand{reg(s, w)}, Operand{Immediate{p}}),
                      make_binary(Mnemonic::add, w, Operand{reg(s, w)}, Operand{Immediate{p}})});
      }
    }
    expect_clean({make_binary(Mnemonic::movabs, Width::b64, Operand{reg(s)},
                              Operand{Immediate{0x1111111111111111}})});
  }

  // The final operation pairs a scratch with the original destination; the
  // splitter picks the scratch, so every (op, width, destination) plan is
  // encoded end to end.
  const Mnemonic ops[] = {Mnemonic::mov, Mnemonic::add, Mnemonic::sub, Mnemonic::and_,
                          Mnemonic::or_, Mnemonic::xor_, Mnemonic::cmp, Mnemonic::test};
  std::vector<Operand> dsts;
  for (std::uint8_t g = 0; g < 16; ++g)
    if (static_cast<Gpr>(g) != Gpr::rsp) dsts.push_back(reg(static_cast<Gpr>(g)));
  for (std::int64_t disp : {0L, 4L, -8L, 0x40L}) {
    for (Gpr base : {Gpr::rsp, Gpr::rbp, Gpr::rdi, Gpr::r12, Gpr::r13}) {
      Memory mem;
      mem.base = reg(base);
      mem.disp = disp;
      dsts.push_back(mem);
    }
  }
  for (Mnemonic op : ops) {
    for (Width w : {Width::b8, Width::b16, Width::b32, Width::b64}) {
      for (const auto& d : dsts) {
        Operand dst = d;
        if (auto* r = std::get_if<Register>(&dst)) *r = reg(r->gpr, w);
        split::SplitRequest req;
        req.value = w == Width::b8 ? 0xc3 : 0xc2c3;
        req.width = w;
        req.sign_extended = w == Width::b64;
        req.context = make_binary(op, w, dst, Operand{Immediate{req.value}});
        try {
          expect_clean(split::split_immediate(req).emitted);
        } catch (const Error& e) {
          log.fail(format_att(req.context) + ": " + e.what());
        }
      }
    }
  }
  for (Gpr d : {Gpr::rax, Gpr::rbx, Gpr::r8, Gpr::r15}) {
    split::SplitRequest req;
    req.value = static_cast<std::int64_t>(0xc3c2cbcacf00c3c3ull);
    req.width = Width::b64;
    req.context = make_binary(Mnemonic::movabs, Width::b64, Operand{reg(d)}, Operand{Immediate{req.value}});
    try {
      expect_clean(split::split_immediate(req).emitted);
    } catch (const Error& e) {
      log.fail(std::string("movabs: ") + e.what());
    }
  }

  const double s = seconds_since(t0);
  if (s >= 5.0) log.fail("took " + fmt(s));
  return log.outcome(std::to_string(encoded) + " sequences, " + fmt(s));
}

// ---------------------------------------------------------------- 4

Outcome layout_law() {
  Log log;
  const auto files = corpus();
  if (files.size() < 10) log.fail("corpus has only " + std::to_string(files.size()) + " files");
  std::size_t fns = 0;
  for (const auto& path : files) {
    const auto name = path.filename().string();
    try {
      auto r = rewrite::rewrite_file(io::read_text_file(path));
      fns += r.stats.functions_instrumented;
      for (const auto& v : testsupport::check_layout(r.text))
        log.fail(name + ":" + v.function + ": " + v.why);
      try {
        rewrite::rewrite_file(r.text);
        log.fail(name + ": second rewrite accepted");
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AlreadyRewritten) log.fail(name + ": wrong guard error");
      }
    } catch (const Error& e) {
      log.fail(name + ": " + e.what());
    }
  }
  return log.outcome(std::to_string(files.size()) + " files, " + std::to_string(fns) +
                     " instrumented functions");
}

// ------------------------------------------------------------ 5 and 6

struct Built {
  fs::path exe;
  std::string objdump;
};

std::optional<Built> link(const fs::path& source, const fs::path& exe, std::string* err) {
  auto r = testsupport::run("gcc -o " + quote(exe) + " " + quote(source), true);
  if (r.status != 0) {
    *err = r.output.substr(0, r.output.find('\n'));
    return std::nullopt;
  }
  auto d = testsupport::run("objdump -d -j .text " + quote(exe));
  return Built{exe, d.output};
}

struct TextScan {
  std::size_t unaligned = 0;
  std::size_t gadgets = 0;
};

TextScan scan_text(const Built& b) {
  const io::Section* text = nullptr;
  auto secs = io::load_elf_exec_sections(b.exe);
  for (const auto& s : secs)
    if (s.name == ".text") text = &s;
  if (!text) throw std::runtime_error("no .text");
  std::vector<std::size_t> starts;
  for (const auto& in : testsupport::parse_objdump(b.objdump))
    if (in.address >= text->virtual_address && in.address < text->virtual_address + text->bytes.size())
      starts.push_back(in.address - text->virtual_address);
  const scan::BoundaryMap map(starts);
  auto r = scan::scan_section({".text", text->file_offset, text->virtual_address, text->bytes.size()},
                              text->bytes, scan::ScanOptions{}, &map);
  return {r.unaligned_count, r.gadget_count};
}

// Function names defined by an assembly file.
std::set<std::string> defined_functions(const std::string& text) {
  std::set<std::string> out;
  for (const auto& s : testsupport::statements(text))
    if (s.starts_with(".type ") && s.find("function") != std::string::npos)
      out.insert(s.substr(6, s.find(',') - 6));
  return out;
}

const std::set<std::string> kImmMnemonics = {"mov", "add", "sub", "and", "or", "xor", "cmp", "test"};

// Immediate-bearing instructions in the given functions whose immediate
// field holds a ret-family byte.
std::vector<std::string> dirty_immediates(const std::string& objdump, const std::set<std::string>& fns) {
  std::vector<std::string> out;
  for (const auto& in : testsupport::parse_objdump(objdump)) {
    if (!fns.contains(in.function)) continue;
    const auto sp = in.text.find_first_of(" \t");
    std::string mn = in.text.substr(0, sp);
    const auto dollar = in.text.find('$');
    if (dollar == std::string::npos || sp == std::string::npos) continue;
    if (mn == "movabs") mn = "mov";
    bool match = false;
    for (const auto& m : kImmMnemonics)
      if (mn == m || (mn.size() == m.size() + 1 && mn.starts_with(m))) match = true;
    if (!match) continue;
    const std::uint64_t v = std::stoull(in.text.substr(dollar + 1), nullptr, 0);
    // The immediate field is the longest tail of the encoding that spells v.
    for (std::size_t n : {8u, 4u, 2u, 1u}) {
      if (in.bytes.size() <= n) continue;
      bool same = true;
      for (std::size_t i = 0; i < n; ++i)
        if (in.bytes[in.bytes.size() - n + i] != static_cast<std::uint8_t>(v >> (8 * i))) same = false;
      if (!same) continue;
      if (!clean_le(v, n)) out.push_back(in.function + ": " + in.text);
      break;
    }
  }
  return out;
}

struct Pair {
  std::string name;
  Built before, after;
};

std::vector<Pair> g_pairs;
std::vector<std::string> g_unlinkable;
std::string g_build_error;

void build_pairs(const fs::path& dir) {
  for (const auto& path : corpus()) {
    const auto name = path.stem().string();
    std::string err;
    auto before = link(path, dir / (name + ".orig"), &err);
    if (!before) {
      g_unlinkable.push_back(name);
      continue;
    }
    try {
      auto rw = rewrite::rewrite_file(io::read_text_file(path));
      io::write_text_file(dir / (name + ".rw.s"), rw.text);
    } catch (const Error& e) {
      g_build_error += name + ": " + e.what() + "; ";
      continue;
    }
    auto after = link(dir / (name + ".rw.s"), dir / (name + ".new"), &err);
    if (!after) {
      g_build_error += name + ": rewritten file does not link: " + err + "; ";
      continue;
    }
    g_pairs.push_back({name, *before, *after});
  }
}

Outcome gadget_reduction() {
  Log log;
  if (!g_build_error.empty()) log.fail(g_build_error);
  std::size_t reduced = 0;
  std::ostringstream counts;
  for (const auto& p : g_pairs) {
    try {
      const auto a = scan_text(p.before), b = scan_text(p.after);
      counts << " " << p.name << "=" << a.unaligned << "->" << b.unaligned;
      if (a.unaligned != 0 && b.unaligned >= a.unaligned)
        log.fail(p.name + " unaligned " + std::to_string(a.unaligned) + " -> " + std::to_string(b.unaligned));
      else
        ++reduced;
      const auto fns = defined_functions(io::read_text_file(p.after.exe.parent_path() / (p.name + ".rw.s")));
      for (const auto& d : dirty_immediates(p.after.objdump, fns)) log.fail(p.name + " dirty immediate " + d);
    } catch (const std::exception& e) {
      log.fail(p.name + ": " + e.what());
    }
  }
  std::string skipped;
  for (const auto& n : g_unlinkable) skipped += " " + n;
  std::fprintf(stderr, "criterion 5 unaligned counts:%s\n", counts.str().c_str());
  return log.outcome(std::to_string(reduced) + "/" + std::to_string(g_pairs.size()) +
                     " linked fixtures reduced; not linkable:" + (skipped.empty() ? " none" : skipped));
}

Outcome differential() {
  Log log;
  if (!g_build_error.empty()) log.fail(g_build_error);
  std::size_t compared = 0;
  std::set<std::string> stems;
  for (const auto& p : g_pairs) {
    auto a = testsupport::run("timeout 10 " + quote(p.before.exe) + " </dev/null");
    auto b = testsupport::run("timeout 10 " + quote(p.after.exe) + " </dev/null");
    ++compared;
    stems.insert(p.name.substr(0, p.name.rfind('_')));
    if (a.status != b.status)
      log.fail(p.name + " exit " + std::to_string(a.status) + " vs " + std::to_string(b.status));
    if (a.output != b.output) log.fail(p.name + " stdout differs");
  }
  if (compared < 5) log.fail("only " + std::to_string(compared) + " runnable fixtures");
  for (const char* need : {"flags", "two_returns", "split_arith"})
    if (!stems.contains(need)) log.fail(std::string("missing fixture ") + need);
  return log.outcome(std::to_string(compared) + " programs compared");
}

// ---------------------------------------------------------------- 7

Outcome decoder_oracle() {
  Log log;
  const io::Section* text = nullptr;
  auto secs = io::load_elf_exec_sections(fixture("bin/sample.elf"));
  for (const auto& s : secs)
    if (s.name == ".text") text = &s;
  if (!text) return {Outcome::fail, "sample.elf has no .text"};
  const auto listing = testsupport::parse_objdump(io::read_text_file(fixture("bin/sample.objdump.txt")));
  std::size_t agree = 0, wrong = 0, undecodable = 0;
  for (const auto& in : listing) {
    const auto r = decode_length(text->bytes, in.address - text->virtual_address);
    if (!r.decoded()) ++undecodable;
    else if (r.length != in.bytes.size()) {
      ++wrong;
      log.fail("wrong length at " + std::to_string(in.address) + ": " + in.text);
    } else
      ++agree;
  }
  const double rate = listing.empty() ? 0.0 : 100.0 * static_cast<double>(agree) / static_cast<double>(listing.size());
  if (rate < 95.0) log.fail("agreement below 95%");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu/%zu agree (%.2f%%), %zu undecodable, %zu wrong length", agree,
                listing.size(), rate, undecodable, wrong);
  return log.outcome(buf);
}

// ---------------------------------------------------------------- 8

Outcome xor_involution() {
  Log log;
  std::mt19937_64 rng(8);
  const auto pair = rewrite::canary_pair(rewrite::RewriteOptions{}, Gpr::r11);
  // Runs the pair against a model machine: the load reads the canary, the
  // xor folds the key register into the top of stack.
  auto run_pair = [&](std::uint64_t canary, std::uint64_t top) {
    std::uint64_t key = 0;
    for (const auto& in : pair) {
      if (in.op == Mnemonic::mov) key = canary;
      else if (in.op == Mnemonic::xor_) top ^= key;
      else log.fail("unexpected instruction in the pair");
    }
    return top;
  };
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t canary = rng(), ret = rng();
    if (i == 0) canary = 0;
    const auto enc = run_pair(canary, ret);
    if (canary != 0 && enc == ret) log.fail("encrypt left the address unchanged");
    if (run_pair(canary, enc) != ret) log.fail("decrypt did not restore the address");
  }
  return log.outcome("10000 pairs");
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const char* title, const Outcome& o) {
    const char* tag = o.status == Outcome::pass ? "PASS" : o.status == Outcome::fail ? "FAIL" : "SKIP";
    if (o.status == Outcome::fail) ++failed;
    std::printf("%s  %d. %s: %s\n", tag, n, title, o.detail.c_str());
    std::fflush(stdout);
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{Outcome::fail, std::string("exception: ") + e.what()};
    }
  };

  report(1, "overlapping ret-imm16 decode", guarded(overlapping_decode));
  report(2, "split soundness", guarded(split_soundness));
  report(3, "self-cleanliness", guarded(self_cleanliness));
  report(4, "layout law", guarded(layout_law));

  if (testsupport::have_toolchain()) {
    testsupport::TempDir dir;
    build_pairs(dir.path());
    report(5, "gadget reduction", guarded(gadget_reduction));
    report(6, "differential execution", guarded(differential));
  } else {
    const Outcome skip{Outcome::skip, "gcc, as or objdump not found; not run"};
    report(5, "gadget reduction", skip);
    report(6, "differential execution", skip);
  }

  report(7, "decoder oracle", guarded(decoder_oracle));
  report(8, "xor involution", guarded(xor_involution));
  return failed == 0 ? 0 : 1;
}
