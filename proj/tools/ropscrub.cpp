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

// ropscrub: rewrite x86-64 assembly against ret-family gadgets and audit
// binaries for what is left.
//
// Exit status: 0 success, 2 input error, 3 regression (report only).

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ropscrub/error.hpp"
#include "ropscrub/io/binary_io.hpp"
#include "ropscrub/isa/encoder.hpp"
#include "ropscrub/rewrite/parser.hpp"
#include "ropscrub/rewrite/rewriter.hpp"
#include "ropscrub/scan/report.hpp"
#include "ropscrub/split/immediate_split.hpp"
#include "ropscrub/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ropscrub;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRegression = 3;

bool use_color() {
  if (const char* env = std::getenv("ROPSCRUB_COLOR")) {
    std::string v = env;
    return v == "1" || v == "always" || v == "true";
  }
  return ::isatty(STDERR_FILENO) != 0;
}

void diag(std::string_view level, std::string_view msg) {
  static const bool color = use_color();
  const char* on = level == "error" ? "\033[1;31m" : "\033[1;33m";
  if (color) std::cerr << on << level << ":\033[0m " << msg << "\n";
  else std::cerr << level << ": " << msg << "\n";
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string hex_bytes(std::span<const std::uint8_t> bytes) {
  std::string out;
  char buf[4];
  for (auto b : bytes) {
    std::snprintf(buf, sizeof buf, "%02x ", b);
    out += buf;
  }
  if (!out.empty()) out.pop_back();
  return out;
}

// --- scan ------------------------------------------------------------------

struct ScanArgs {
  std::string target;
  bool flat = false;
  bool assembly = false;
  bool json_out = false;
  bool list_gadgets = false;
  bool no_dedupe = false;
  std::string boundaries;
  scan::ScanOptions opts;
};

std::vector<io::Section> assemble_and_load(const fs::path& source) {
  auto tmp = fs::temp_directory_path() / ("ropscrub-" + std::to_string(::getpid()) + ".o");
  std::string cmd = "as --64 -o '" + tmp.string() + "' '" + source.string() + "'";
  int rc = std::system(cmd.c_str());
  if (rc != 0) {
    fs::remove(tmp);
    throw Error(ErrorCode::IoFailure, "assembler failed on " + source.string());
  }
  auto sections = io::load_elf_exec_sections(tmp);
  fs::remove(tmp);
  return sections;
}

int cmd_scan(const ScanArgs& a) {
  auto opts = a.opts;
  opts.dedupe = !a.no_dedupe;
  opts.validate();

  std::vector<io::Section> sections;
  if (a.flat) sections.push_back(io::load_flat(a.target));
  else if (a.assembly) sections = assemble_and_load(a.target);
  else sections = io::load_elf_exec_sections(a.target);

  std::optional<scan::BoundaryMap> given;
  if (!a.boundaries.empty()) {
    if (sections.size() != 1)
      throw Error(ErrorCode::InvalidArgument, "--boundaries needs a target with one section");
    given = io::read_boundary_map(a.boundaries);
    given->check_within(sections.front().bytes.size());
  }

  std::vector<scan::ScanReport> reports;
  json gadget_lists = json::array();
  for (const auto& s : sections) {
    scan::SectionIdentity id{s.name, s.file_offset, s.virtual_address, s.bytes.size()};
    // Raw blobs have no intended instruction stream unless one is supplied.
    std::optional<scan::BoundaryMap> map = given;
    if (!map && !a.flat) map = scan::sweep_boundaries(s.bytes);
    std::vector<scan::GadgetRecord> gadgets;
    reports.push_back(scan::scan_section(id, s.bytes, opts, map ? &*map : nullptr, &gadgets));
    if (a.list_gadgets) gadget_lists.push_back(gadgets);
  }

  if (a.json_out) {
    json out = reports.size() == 1 ? json(reports.front()) : json(reports);
    if (a.list_gadgets) {
      json wrapped{{"reports", out}, {"gadgets", reports.size() == 1 ? gadget_lists[0] : gadget_lists}};
      out = wrapped;
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::cout << "section " << r.section.name << "  offset " << hex(r.section.file_offset)
              << "  vaddr " << hex(r.section.virtual_address) << "  size " << r.section.size
              << "\n";
    std::cout << "  free-branch bytes  " << r.total_free_branch_bytes << "  (";
    bool first = true;
    for (const auto& [k, n] : r.per_kind) {
      std::cout << (first ? "" : ", ") << isa::to_string(k) << " " << n;
      first = false;
    }
    std::cout << ")\n";
    std::cout << "  gadgets            " << r.gadget_count << "  (aligned " << r.aligned_count
              << ", unaligned " << r.unaligned_count << ", unknown " << r.unknown_count << ")\n";
    if (a.list_gadgets) {
      for (const auto& g : gadget_lists[i]) {
        std::cout << "    " << hex(g["start_offset"].get<std::size_t>()) << "  "
                  << g["aligned"].get<std::string>() << "  ";
        bool f = true;
        for (const auto& ins : g["instructions"]) {
          std::cout << (f ? "" : "; ") << ins.get<std::string>();
          f = false;
        }
        std::cout << "\n";
      }
    }
  }
  return kExitOk;
}

// --- rewrite ---------------------------------------------------------------

struct RewriteArgs {
  std::string input;
  std::string output;
  bool json_out = false;
  bool no_encrypt = false;
  bool no_sled = false;
  bool no_imm = false;
  std::size_t sled_length = 16;
  std::int64_t red_zone = split::kDefaultRedZone;
};

int cmd_rewrite(const RewriteArgs& a) {
  rewrite::RewriteOptions opts;
  opts.enable_encrypt = !a.no_encrypt;
  opts.enable_sled = !a.no_sled;
  opts.enable_imm = !a.no_imm;
  opts.sled_length = a.sled_length;
  opts.red_zone = a.red_zone;

  const auto source = io::read_text_file(a.input);
  auto result = rewrite::rewrite_file(source, opts);
  for (const auto& w : result.stats.warnings) diag("warning", w);

  std::ostream& stats_out = a.output.empty() ? std::cerr : std::cout;
  if (a.output.empty()) std::cout << result.text;
  else io::write_text_file(a.output, result.text);

  const auto& s = result.stats;
  if (a.json_out) {
    stats_out << json(s).dump(2) << "\n";
  } else {
    stats_out << "functions " << s.functions_total << ", instrumented "
              << s.functions_instrumented << ", rets protected " << s.rets_protected
              << ", tail jumps protected " << s.tail_jumps_protected << ", immediates split "
              << s.immediates_split << ", skipped " << s.immediates_skipped << ", opaque lines "
              << s.opaque_lines << "\n";
  }
  return kExitOk;
}

// --- split -----------------------------------------------------------------

struct SplitArgs {
  std::string value;
  unsigned width = 32;
  std::string op = "mov";
  std::string dst;
  bool json_out = false;
  std::int64_t red_zone = split::kDefaultRedZone;
};

isa::Mnemonic mnemonic_from(const std::string& op) {
  static const std::map<std::string, isa::Mnemonic> kOps = {
      {"mov", isa::Mnemonic::mov}, {"add", isa::Mnemonic::add}, {"sub", isa::Mnemonic::sub},
      {"and", isa::Mnemonic::and_}, {"or", isa::Mnemonic::or_}, {"xor", isa::Mnemonic::xor_},
      {"cmp", isa::Mnemonic::cmp}, {"test", isa::Mnemonic::test}};
  auto it = kOps.find(op);
  if (it == kOps.end()) throw Error(ErrorCode::InvalidArgument, "unknown --op " + op);
  return it->second;
}

int cmd_split(const SplitArgs& a) {
  auto value = rewrite::parse_integer(a.value);
  if (!value) throw Error(ErrorCode::InvalidArgument, "not an integer: " + a.value);
  auto width = isa::width_from_bits(a.width);
  if (!width) throw Error(ErrorCode::InvalidArgument, "--width must be 8, 16, 32 or 64");

  isa::Register dst = isa::reg(isa::Gpr::rax, *width);
  if (!a.dst.empty()) {
    auto r = isa::parse_register(a.dst.starts_with("%") ? a.dst.substr(1) : a.dst);
    if (!r || r->width != *width)
      throw Error(ErrorCode::InvalidArgument, "--dst must name a " + std::to_string(a.width) +
                                                  "-bit general-purpose register");
    dst = *r;
  }

  split::SplitRequest req;
  req.value = *value;
  req.width = *width;
  auto op = mnemonic_from(a.op);
  if (*width == isa::Width::b64) {
    const bool fits = *value >= INT32_MIN && *value <= INT32_MAX;
    req.sign_extended = fits;
    if (!fits) {
      if (op != isa::Mnemonic::mov)
        throw Error(ErrorCode::InvalidArgument, "a full 64-bit immediate only exists for mov");
      op = isa::Mnemonic::movabs;
    }
  } else if (!isa::immediate_fits(*value, *width)) {
    throw Error(ErrorCode::InvalidArgument, a.value + " does not fit in " +
                                                std::to_string(a.width) + " bits");
  }
  req.context = isa::make_binary(op, *width, dst, isa::Immediate{*value});
  req.red_zone = a.red_zone;

  auto plan = split::split_immediate(req);
  if (plan.warning) diag("warning", *plan.warning);

  const auto field = split::immediate_field_size(plan.width, plan.sign_extended);
  auto mask = [&](std::int64_t v) {
    return field == 8 ? static_cast<std::uint64_t>(v)
                      : static_cast<std::uint64_t>(v) & ((1ULL << (8 * field)) - 1);
  };

  json lines = json::array();
  for (const auto& ins : plan.emitted) {
    auto enc = isa::encode(ins);
    lines.push_back({{"text", isa::format_att(ins)}, {"bytes", hex_bytes(enc.bytes())}});
  }
  if (a.json_out) {
    json out{{"value", hex(mask(*value))},
             {"width", a.width},
             {"sign_extended", plan.sign_extended},
             {"part_a", hex(mask(plan.part_a))},
             {"part_b", hex(mask(plan.part_b))},
             {"scratch", plan.scratch ? json(isa::register_name(*plan.scratch)) : json(nullptr)},
             {"emitted", lines}};
    if (plan.warning) out["warning"] = *plan.warning;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }
  std::cout << "part_a " << hex(mask(plan.part_a)) << "\n";
  std::cout << "part_b " << hex(mask(plan.part_b)) << "\n";
  if (plan.scratch) std::cout << "scratch %" << isa::register_name(*plan.scratch) << "\n";
  for (const auto& l : lines)
    std::cout << "  " << l["text"].get<std::string>() << "\t# " << l["bytes"].get<std::string>()
              << "\n";
  return kExitOk;
}

// --- report ----------------------------------------------------------------

struct ReportArgs {
  std::string before;
  std::string after;
  bool json_out = false;
};

std::vector<scan::ScanReport> load_reports(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaMismatch, path + ": " + e.what());
  }
  try {
    return scan::parse_scan_reports(j);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

int cmd_report(const ReportArgs& a) {
  auto diffs = scan::compare_all(load_reports(a.before), load_reports(a.after));
  bool regression = false;
  for (const auto& d : diffs) regression = regression || d.regression;

  if (a.json_out) {
    std::cout << (diffs.size() == 1 ? json(diffs.front()) : json(diffs)).dump(2) << "\n";
  } else {
    for (const auto& d : diffs) {
      std::cout << "section " << d.section << (d.regression ? "  REGRESSION" : "") << "\n";
      for (const auto& [name, f] : d.fields) {
        std::printf("  %-28s %8lld -> %8lld  %+8lld  %s\n", name.c_str(),
                    static_cast<long long>(f.before), static_cast<long long>(f.after),
                    static_cast<long long>(f.delta), scan::format_percent(f).c_str());
      }
    }
    std::fflush(stdout);
  }
  return regression ? kExitRegression : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rewrite x86-64 assembly against ret-family gadgets and audit binaries"};
  app.set_version_flag("--version", "ropscrub " + std::string(kVersion));
  app.require_subcommand(1);

  ScanArgs scan_args;
  auto* scan_cmd = app.add_subcommand("scan", "Count ret-family gadgets in an ELF file, raw blob or assembly file");
  scan_cmd->add_option("target", scan_args.target, "File to scan")->required();
  auto* flat_opt = scan_cmd->add_flag("--flat", scan_args.flat, "Treat the target as raw bytes");
  scan_cmd->add_flag("--asm", scan_args.assembly, "Assemble the target with `as` first")->excludes(flat_opt);
  scan_cmd->add_flag("--json", scan_args.json_out, "Print ScanReport JSON");
  scan_cmd->add_flag("--gadgets", scan_args.list_gadgets, "List every gadget");
  scan_cmd->add_flag("--no-dedupe", scan_args.no_dedupe, "Keep gadgets with identical bytes");
  scan_cmd->add_option("--max-instructions", scan_args.opts.max_instructions, "Instructions per gadget, free branch included")
      ->check(CLI::PositiveNumber);
  scan_cmd->add_option("--max-window", scan_args.opts.max_window, "Bytes per gadget")
      ->check(CLI::PositiveNumber);
  scan_cmd->add_option("--boundaries", scan_args.boundaries, "Boundary map JSON ({\"starts\": [...]})");

  RewriteArgs rw;
  auto* rw_cmd = app.add_subcommand("rewrite", "Instrument an AT&T assembly file");
  rw_cmd->add_option("input", rw.input, "Assembly source")->required();
  rw_cmd->add_option("-o,--output", rw.output, "Output file (default: standard output)");
  rw_cmd->add_flag("--json", rw.json_out, "Print stats as JSON");
  rw_cmd->add_flag("--no-encrypt", rw.no_encrypt, "Skip return-address encryption");
  rw_cmd->add_flag("--no-sled", rw.no_sled, "Skip nop sleds");
  rw_cmd->add_flag("--no-imm", rw.no_imm, "Skip immediate re-encoding");
  rw_cmd->add_option("--sled-length", rw.sled_length, "Nops before each return");
  rw_cmd->add_option("--red-zone", rw.red_zone, "Bytes below %rsp to step over")
      ->check(CLI::NonNegativeNumber);

  SplitArgs sp;
  auto* sp_cmd = app.add_subcommand("split", "Show the clean split of one immediate");
  sp_cmd->add_option("value", sp.value, "Immediate (decimal, 0x hex, 0b binary)")->required();
  sp_cmd->add_option("--width", sp.width, "Operand width in bits")->check(CLI::IsMember({8, 16, 32, 64}));
  sp_cmd->add_option("--op", sp.op, "mov, add, sub, and, or, xor, cmp or test");
  sp_cmd->add_option("--dst", sp.dst, "Destination register (default: the accumulator)");
  sp_cmd->add_option("--red-zone", sp.red_zone, "Bytes below %rsp to step over")
      ->check(CLI::NonNegativeNumber);
  sp_cmd->add_flag("--json", sp.json_out, "Print the plan as JSON");

  ReportArgs rp;
  auto* rp_cmd = app.add_subcommand("report", "Compare two ScanReport JSON files");
  rp_cmd->add_option("before", rp.before, "Report before rewriting")->required();
  rp_cmd->add_option("after", rp.after, "Report after rewriting")->required();
  rp_cmd->add_flag("--json", rp.json_out, "Print DiffReport JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*scan_cmd) return cmd_scan(scan_args);
    if (*rw_cmd) return cmd_rewrite(rw);
    if (*sp_cmd) return cmd_split(sp);
    if (*rp_cmd) return cmd_report(rp);
  } catch (const Error& e) {
    diag("error", std::string(to_string(e.code())) + ": " + e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    diag("error", e.what());
    return kExitInput;
  }
  return kExitInput;
}
