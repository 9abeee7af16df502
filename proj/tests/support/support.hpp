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

#include <sys/wait.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ropscrub/io/binary_io.hpp"
#include "ropscrub/isa/instruction.hpp"
#include "ropscrub/rewrite/parser.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& rel) { return fs::path(ROPSCRUB_FIXTURE_DIR) / rel; }

inline std::vector<std::uint8_t> unhex(std::string_view s) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < s.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(std::stoul(std::string(s.substr(i, 2)), nullptr, 16)));
  return out;
}

template <typename Bytes>
std::string hex(const Bytes& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : bytes) {
    out += kDigits[b >> 4];
    out += kDigits[b & 15];
  }
  return out;
}

struct RunResult {
  int status = -1;
  std::string output;
};

// Runs a shell command, capturing stdout (and stderr when asked).
inline RunResult run(const std::string& cmd, bool merge_stderr = false) {
  RunResult r;
  const std::string full = merge_stderr ? cmd + " 2>&1" : cmd;
  FILE* p = ::popen(full.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.output.append(buf.data(), n);
  const int raw = ::pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

inline bool have_tool(const std::string& name) {
  return run("command -v " + name + " >/dev/null 2>&1").status == 0;
}

inline bool have_toolchain() { return have_tool("as") && have_tool("gcc") && have_tool("objdump"); }

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("ropscrub-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Assembles `source` with gas and returns the bytes of .text.
inline std::vector<std::uint8_t> gas_text(const std::string& source) {
  TempDir dir;
  ropscrub::io::write_text_file(dir / "in.s", source);
  auto r = run("as --64 -o " + quote(dir / "in.o") + " " + quote(dir / "in.s"), true);
  if (r.status != 0) throw std::runtime_error("as failed: " + r.output);
  for (auto& s : ropscrub::io::load_elf_exec_sections(dir / "in.o"))
    if (s.name == ".text") return s.bytes;
  return {};
}

struct ObjdumpInsn {
  std::uint64_t address = 0;
  std::vector<std::uint8_t> bytes;
  std::string text;  // mnemonic and operands as objdump prints them
  std::string function;
};

// Parses `objdump -d` output. Long instructions spill their bytes onto
// continuation lines that carry no text; those are merged.
inline std::vector<ObjdumpInsn> parse_objdump(const std::string& listing) {
  std::vector<ObjdumpInsn> out;
  std::string function;
  std::size_t pos = 0;
  while (pos < listing.size()) {
    auto eol = listing.find('\n', pos);
    if (eol == std::string::npos) eol = listing.size();
    const std::string line = listing.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.size() > 2 && line.back() == ':' && line.find('<') != std::string::npos) {
      const auto lt = line.find('<');
      function = line.substr(lt + 1, line.rfind('>') - lt - 1);
      continue;
    }
    const auto colon = line.find(":\t");
    if (colon == std::string::npos) continue;
    std::uint64_t address = 0;
    try {
      address = std::stoull(line.substr(0, colon), nullptr, 16);
    } catch (...) {
      continue;
    }
    const auto rest = line.substr(colon + 2);
    const auto tab = rest.find('\t');
    const std::string hexpart = rest.substr(0, tab);
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 0; i + 1 < hexpart.size(); ++i) {
      if (hexpart[i] == ' ') continue;
      bytes.push_back(static_cast<std::uint8_t>(std::stoul(hexpart.substr(i, 2), nullptr, 16)));
      ++i;
    }
    if (tab == std::string::npos) {
      if (!out.empty()) out.back().bytes.insert(out.back().bytes.end(), bytes.begin(), bytes.end());
      continue;
    }
    ObjdumpInsn insn{address, std::move(bytes), rest.substr(tab + 1), function};
    out.push_back(std::move(insn));
  }
  return out;
}

// Line-oriented view of assembly text that does not use the library parser:
// strips '#' comments, drops labels and blank lines, and collapses spacing so
// "movq\t%fs:0x28, %r11" reads "movq %fs:0x28,%r11".
inline std::vector<std::string> statements(const std::string& text, std::vector<std::string>* raw = nullptr) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    // Leading labels.
    for (;;) {
      auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos) {
        line.clear();
        break;
      }
      auto colon = line.find(':', first);
      auto space = line.find_first_of(" \t", first);
      if (colon == std::string::npos || (space != std::string::npos && space < colon) ||
          line.find('%', first) < colon || line.find('"', first) < colon)
        break;
      line = line.substr(colon + 1);
    }
    std::string norm;
    bool pending_space = false;
    for (char c : line) {
      if (c == ' ' || c == '\t') {
        pending_space = !norm.empty();
        continue;
      }
      if (c == ',') {
        norm += ',';
        pending_space = false;
        continue;
      }
      if (pending_space && norm.back() != ',') norm += ' ';
      pending_space = false;
      norm += c;
    }
    if (norm.empty()) continue;
    out.push_back(norm);
    if (raw) raw->push_back(line);
  }
  return out;
}

inline bool is_ret_statement(const std::string& s) {
  const auto m = s.substr(0, s.find(' '));
  return m == "ret" || m == "retq" || (m == "rep" && s.ends_with(" ret"));
}

struct LayoutViolation {
  std::string function;
  std::size_t statement;
  std::string why;
};

// Checks the emitted shape of rewritten text: each instrumented function
// (one with a ret) opens with the encrypt pair and every ret is preceded by
// exactly `sled` nops and the decrypt pair.
inline std::vector<LayoutViolation> check_layout(const std::string& text, std::size_t sled = 16) {
  const auto st = statements(text);
  std::vector<LayoutViolation> out;
  auto is_load = [](const std::string& s) {
    return s == "movq %fs:0x28,%r11" || s == "movq %fs:0x28,%r10";
  };
  auto is_xor = [](const std::string& s) {
    return s == "xorq %r11,(%rsp)" || s == "xorq %r10,(%rsp)";
  };
  std::string fn;
  std::size_t begin = 0;
  auto close = [&](std::size_t end) {
    if (fn.empty()) return;
    bool has_ret = false;
    for (std::size_t i = begin; i < end; ++i) has_ret = has_ret || is_ret_statement(st[i]);
    // Split-off .cold parts are entered by a jump and carry no entry pair.
    if (has_ret && fn.find(".cold") == std::string::npos) {
      std::size_t first = begin;
      while (first < end && st[first][0] == '.') ++first;
      if (first < end && st[first] == "endbr64") ++first;
      if (first + 1 >= end || !is_load(st[first]) || !is_xor(st[first + 1]))
        out.push_back({fn, first, "entry does not start with the encrypt pair"});
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (!is_ret_statement(st[i])) continue;
      bool ok = i >= sled + 2 && is_xor(st[i - 1]) && is_load(st[i - 2]);
      for (std::size_t k = 0; ok && k < sled; ++k) ok = st[i - 3 - k] == "nop";
      if (!ok) out.push_back({fn, i, "ret without sled and decrypt pair"});
    }
    fn.clear();
  };
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto& s = st[i];
    if (s.starts_with(".type ") &&
        (s.find("@function") != std::string::npos || s.find("%function") != std::string::npos)) {
      close(i);
      fn = s.substr(6, s.find(',') - 6);
      begin = i + 1;
    } else if (s.starts_with(".size ") && !fn.empty() && s.substr(6, s.find(',') - 6) == fn) {
      close(i);
    }
  }
  close(st.size());
  return out;
}

// One AT&T line ("addq $0x61, %r8") as a subset instruction, going through
// the assembly parser for the operands.
inline ropscrub::isa::SubsetInstruction from_att(const std::string& line) {
  using namespace ropscrub;
  auto parsed = rewrite::parse_assembly("\t" + line + "\n");
  for (const auto& part : parsed.parts) {
    const auto* inter = std::get_if<rewrite::Interlude>(&part);
    if (!inter) continue;
    for (const auto& rec : inter->records) {
      if (rec.kind != rewrite::RecordKind::instruction) continue;
      std::string m = rec.mnemonic;
      isa::SubsetInstruction out;
      static const std::vector<std::pair<std::string, isa::Mnemonic>> kOps = {
          {"movabs", isa::Mnemonic::movabs}, {"pushfq", isa::Mnemonic::pushfq},
          {"popfq", isa::Mnemonic::popfq},   {"push", isa::Mnemonic::push},
          {"pop", isa::Mnemonic::pop},       {"nop", isa::Mnemonic::nop},
          {"ret", isa::Mnemonic::ret},       {"lea", isa::Mnemonic::lea},
          {"mov", isa::Mnemonic::mov},       {"add", isa::Mnemonic::add},
          {"sub", isa::Mnemonic::sub},       {"and", isa::Mnemonic::and_},
          {"or", isa::Mnemonic::or_},        {"xor", isa::Mnemonic::xor_},
          {"cmp", isa::Mnemonic::cmp},       {"test", isa::Mnemonic::test},
      };
      bool found = false;
      for (const auto& [base, op] : kOps) {
        if (m == base) {
          out.op = op;
          found = true;
          break;
        }
        if (m.size() == base.size() + 1 && m.starts_with(base)) {
          if (auto w = isa::width_from_suffix(m.back())) {
            out.op = op;
            out.width = *w;
            found = true;
            break;
          }
        }
      }
      if (!found) throw std::runtime_error("unknown mnemonic in " + line);
      std::vector<isa::Operand> ops;
      for (const auto& o : rec.operands) {
        if (auto* r = std::get_if<isa::Register>(&o)) ops.emplace_back(*r);
        else if (auto* i = std::get_if<isa::Immediate>(&o)) ops.emplace_back(*i);
        else if (auto* mm = std::get_if<isa::Memory>(&o)) ops.emplace_back(*mm);
        else throw std::runtime_error("unsupported operand in " + line);
      }
      if (ops.size() == 1) {
        // push reads its operand, pop writes it.
        (out.op == isa::Mnemonic::push ? out.src : out.dst) = ops[0];
        if (auto* r = std::get_if<isa::Register>(&ops[0])) out.width = r->width;
      } else if (ops.size() == 2) {
        out.src = ops[0];
        out.dst = ops[1];
      }
      return out;
    }
  }
  throw std::runtime_error("no instruction in " + line);
}

}  // namespace testsupport
