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

#include "ropscrub/rewrite/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>
#include <string>

#include "ropscrub/error.hpp"

namespace ropscrub::rewrite {

namespace {

constexpr std::array<std::string_view, 21> kPrefixes = {
    "rep",    "repe",   "repz", "repne", "repnz", "lock", "notrack",
    "bnd",    "data16", "data32", "addr32", "rex64", "rex", "cs",
    "ds",     "es",     "ss",   "fs",    "gs",    "xacquire", "xrelease"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_symbol_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}
bool is_symbol_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' ||
         c == '@';
}

struct LineScan {
  std::string code;          // the statement with comments blanked out
  bool multi_statement = false;
};

// Strips comments, tracking strings and /* */ blocks that span lines.
LineScan scan_line(std::string_view line, bool& in_block, std::size_t line_no) {
  LineScan out;
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_block) {
      if (c == '*' && i + 1 < line.size() && line[i + 1] == '/') {
        in_block = false;
        ++i;
        out.code += ' ';
      }
      continue;
    }
    if (in_string) {
      out.code += c;
      if (c == '\\' && i + 1 < line.size()) out.code += line[++i];
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.code += c;
    } else if (c == '#') {
      break;
    } else if (c == '/' && i + 1 < line.size() && line[i + 1] == '*') {
      in_block = true;
      ++i;
    } else {
      if (c == ';') out.multi_statement = true;
      out.code += c;
    }
  }
  if (in_string)
    throw Error(ErrorCode::MalformedSource,
                "line " + std::to_string(line_no) + ": unterminated string literal");
  return out;
}

// Consumes a leading `name:`; returns the label or nullopt.
std::optional<std::string> take_label(std::string_view& code) {
  std::string_view s = trim(code);
  std::size_t i = 0;
  if (s.empty()) return std::nullopt;
  if (s[0] == '"') {
    auto close = s.find('"', 1);
    if (close == s.npos) return std::nullopt;
    i = close + 1;
  } else if (is_symbol_start(s[0]) || std::isdigit(static_cast<unsigned char>(s[0]))) {
    while (i < s.size() && is_symbol_char(s[i])) ++i;
  } else {
    return std::nullopt;
  }
  std::size_t j = i;
  while (j < s.size() && (s[j] == ' ' || s[j] == '\t')) ++j;
  if (j >= s.size() || s[j] != ':') return std::nullopt;
  if (j + 1 < s.size() && s[j + 1] == ':') return std::nullopt;
  std::string name(s.substr(0, i));
  code = s.substr(j + 1);
  return name;
}

std::vector<std::string> split_operands(std::string_view text, bool& ok) {
  std::vector<std::string> out;
  int depth = 0;
  bool in_string = false;
  std::string cur;
  for (char c : text) {
    if (in_string) {
      cur += c;
      if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth < 0) ok = false;
    if (c == ',' && depth == 0) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) ok = false;
  if (!trim(cur).empty() || !out.empty()) out.emplace_back(trim(cur));
  for (const auto& o : out)
    if (o.empty()) ok = false;
  return out;
}

std::optional<isa::Register> parse_percent_register(std::string_view t) {
  if (!t.starts_with("%")) return std::nullopt;
  return isa::parse_register(lower(t.substr(1)));
}

std::optional<isa::Memory> parse_memory(std::string_view text) {
  isa::Memory mem;
  std::string_view t = trim(text);
  if (t.starts_with("%")) {
    auto colon = t.find(':');
    if (colon == t.npos) return std::nullopt;
    auto seg = lower(t.substr(1, colon - 1));
    if (seg == "fs") mem.segment = isa::Segment::fs;
    else if (seg == "gs") mem.segment = isa::Segment::gs;
    else return std::nullopt;
    t = trim(t.substr(colon + 1));
  }
  auto open = t.find('(');
  std::string_view disp = trim(open == t.npos ? t : t.substr(0, open));
  if (open != t.npos) {
    if (t.back() != ')') return std::nullopt;
    std::string_view inner = t.substr(open + 1, t.size() - open - 2);
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= inner.size(); ++i) {
      if (i == inner.size() || inner[i] == ',') {
        parts.push_back(trim(inner.substr(start, i - start)));
        start = i + 1;
      }
    }
    if (parts.empty() || parts.size() > 3) return std::nullopt;
    if (!parts[0].empty()) {
      if (lower(parts[0]) == "%rip") {
        mem.rip_relative = true;
      } else {
        auto base = parse_percent_register(parts[0]);
        if (!base) return std::nullopt;
        mem.base = base;
      }
    }
    if (parts.size() >= 2 && !parts[1].empty()) {
      auto index = parse_percent_register(parts[1]);
      if (!index || mem.rip_relative) return std::nullopt;
      mem.index = index;
    }
    if (parts.size() == 3) {
      auto scale = parse_integer(parts[2]);
      if (!scale || (*scale != 1 && *scale != 2 && *scale != 4 && *scale != 8))
        return std::nullopt;
      mem.scale = static_cast<std::uint8_t>(*scale);
    }
  }
  if (!disp.empty()) {
    if (auto v = parse_integer(disp)) mem.disp = *v;
    else mem.symbol = std::string(disp);
  } else if (open == t.npos) {
    return std::nullopt;
  }
  return mem;
}

bool takes_branch_target(std::string_view m) {
  return is_unconditional_jump(m) || is_conditional_jump(m) || is_call(m) ||
         m.starts_with("loop") || m == "xbegin";
}

void parse_instruction(InstructionRecord& rec, std::string_view code) {
  std::string_view rest = trim(code);
  auto next_word = [&]() {
    std::size_t i = 0;
    while (i < rest.size() && !std::isspace(static_cast<unsigned char>(rest[i]))) ++i;
    std::string_view w = rest.substr(0, i);
    rest = trim(rest.substr(i));
    return w;
  };
  std::string word = lower(next_word());
  while (!rest.empty() &&
         std::find(kPrefixes.begin(), kPrefixes.end(), word) != kPrefixes.end()) {
    rec.prefixes.push_back(word);
    word = lower(next_word());
  }
  rec.mnemonic = word;
  if (rest.empty()) return;

  bool ok = true;
  auto texts = split_operands(rest, ok);
  if (!ok) {
    rec.kind = RecordKind::opaque;
    return;
  }
  const bool branch = takes_branch_target(rec.mnemonic);
  for (const auto& t : texts) {
    if (branch) {
      rec.operands.emplace_back(OtherOperand{t});
      continue;
    }
    auto op = parse_operand(t);
    if (!op) {
      rec.kind = RecordKind::opaque;
      rec.operands.clear();
      return;
    }
    rec.operands.push_back(std::move(*op));
  }
}

bool is_assignment(std::string_view code) {
  std::string_view s = trim(code);
  std::size_t i = 0;
  if (s.empty() || !is_symbol_start(s[0])) return false;
  while (i < s.size() && is_symbol_char(s[i])) ++i;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return i < s.size() && s[i] == '=' && (i + 1 >= s.size() || s[i + 1] != '=');
}

// Name of the symbol a `.type` / `.size` / `.globl` directive is about.
std::string directive_subject(std::string_view stmt) {
  std::string_view s = trim(stmt);
  auto sp = s.find_first_of(" \t");
  if (sp == s.npos) return {};
  s = trim(s.substr(sp));
  auto comma = s.find(',');
  return std::string(trim(s.substr(0, comma)));
}

std::string directive_name(std::string_view stmt) {
  std::string_view s = trim(stmt);
  return lower(s.substr(0, s.find_first_of(" \t")));
}

bool is_function_type(std::string_view stmt) {
  auto comma = stmt.find(',');
  if (comma == stmt.npos) return false;
  auto kind = lower(trim(stmt.substr(comma + 1)));
  return kind == "@function" || kind == "%function" || kind == "stt_func" ||
         kind == "\"function\"" || kind == "@gnu_indirect_function";
}

std::set<std::string, std::less<>> function_names(const std::vector<InstructionRecord>& recs) {
  std::set<std::string, std::less<>> typed, globals;
  for (const auto& r : recs) {
    if (r.kind != RecordKind::directive) continue;
    auto d = directive_name(r.code);
    if (d == ".type" && is_function_type(r.code)) typed.insert(directive_subject(r.code));
    if (d == ".globl" || d == ".global") globals.insert(directive_subject(r.code));
  }
  if (!typed.empty()) return typed;

  auto followed_by_code = [&](std::size_t i) {
    if (recs[i].is_code()) return true;
    for (std::size_t j = i + 1; j < recs.size(); ++j) {
      const auto& r = recs[j];
      if (r.is_code()) return true;
      if (r.kind == RecordKind::blank) continue;
      if (r.kind == RecordKind::directive) {
        auto d = directive_name(r.code);
        if (d.starts_with(".cfi") || d == ".p2align" || d == ".align" || d == ".balign")
          continue;
      }
      return false;
    }
    return false;
  };

  std::set<std::string, std::less<>> out;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (const auto& l : recs[i].labels) {
      if (is_local_label(l)) continue;
      if (!globals.empty() ? globals.contains(l) : followed_by_code(i)) out.insert(l);
    }
  }
  return out;
}

}  // namespace

std::optional<std::int64_t> parse_integer(std::string_view text) {
  std::string_view s = trim(text);
  bool negative = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    negative = s[0] == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  } else if (s.size() > 2 && s[0] == '0' && (s[1] == 'b' || s[1] == 'B')) {
    base = 2;
    s.remove_prefix(2);
  } else if (s.size() > 1 && s[0] == '0') {
    base = 8;
    s.remove_prefix(1);
  }
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if (negative) v = 0 - v;
  return static_cast<std::int64_t>(v);
}

std::optional<AsmOperand> parse_operand(std::string_view text) {
  std::string_view t = trim(text);
  if (t.empty()) return std::nullopt;
  if (std::count(t.begin(), t.end(), '(') != std::count(t.begin(), t.end(), ')'))
    return std::nullopt;
  if (t[0] == '*') return OtherOperand{std::string(t)};
  if (t[0] == '$') {
    if (auto v = parse_integer(t.substr(1))) return isa::Immediate{*v};
    return OtherOperand{std::string(t)};
  }
  if (t[0] == '%' && t.find(':') == t.npos) {
    if (auto r = parse_percent_register(t)) return *r;
    return OtherOperand{std::string(t)};
  }
  if (auto m = parse_memory(t)) return *m;
  return OtherOperand{std::string(t)};
}

ParsedAssembly parse_assembly(std::string_view source) {
  ParsedAssembly out;
  if (source.empty()) return out;

  out.trailing_newline = source.back() == '\n';
  std::vector<InstructionRecord> recs;
  bool in_block = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < source.size()) {
    auto nl = source.find('\n', pos);
    std::string_view line = source.substr(pos, nl == source.npos ? source.npos : nl - pos);
    pos = nl == source.npos ? source.size() : nl + 1;
    ++line_no;

    InstructionRecord rec;
    rec.raw = std::string(line);
    rec.line = line_no;
    const bool started_in_block = in_block;
    auto scan = scan_line(line, in_block, line_no);
    std::string_view code = scan.code;

    if (!started_in_block) {
      while (auto label = take_label(code)) rec.labels.push_back(*label);
    }
    std::string_view stmt = trim(code);
    // The statement as written, comment included, for re-rendering.
    std::string_view after_labels = line;
    for (std::size_t i = 0; i < rec.labels.size(); ++i) take_label(after_labels);
    rec.statement = std::string(trim(after_labels));
    rec.code = std::string(stmt);

    if (stmt.empty()) {
      rec.kind = rec.labels.empty() ? RecordKind::blank : RecordKind::label;
    } else if (scan.multi_statement) {
      rec.kind = RecordKind::opaque;
    } else if (stmt[0] == '.' || is_assignment(stmt)) {
      rec.kind = RecordKind::directive;
    } else {
      rec.kind = RecordKind::instruction;
      parse_instruction(rec, stmt);
    }
    recs.push_back(std::move(rec));
  }
  if (in_block) throw Error(ErrorCode::MalformedSource, "unterminated block comment");

  const auto names = function_names(recs);
  Interlude pending;
  std::optional<FunctionSpan> current;
  std::set<std::string, std::less<>> started;

  auto close = [&]() {
    if (current) {
      current->analyze();
      out.parts.emplace_back(std::move(*current));
      current.reset();
    }
  };

  for (auto& r : recs) {
    std::optional<std::string> opens;
    for (const auto& l : r.labels) {
      if (names.contains(l) && !started.contains(l)) {
        opens = l;
        break;
      }
    }
    if (opens) {
      close();
      if (!pending.records.empty()) out.parts.emplace_back(std::move(pending));
      pending = Interlude{};
      started.insert(*opens);
      current.emplace();
      current->name = *opens;
    }
    bool ends = current && r.kind == RecordKind::directive &&
                directive_name(r.code) == ".size" &&
                directive_subject(r.code) == current->name;
    if (current) current->body.push_back(std::move(r));
    else pending.records.push_back(std::move(r));
    if (ends) close();
  }
  close();
  if (!pending.records.empty()) out.parts.emplace_back(std::move(pending));
  return out;
}

}  // namespace ropscrub::rewrite
