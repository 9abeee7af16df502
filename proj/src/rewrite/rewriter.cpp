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

#include "ropscrub/rewrite/rewriter.hpp"

#include "ropscrub/error.hpp"
#include "ropscrub/rewrite/parser.hpp"
#include "ropscrub/version.hpp"

namespace ropscrub::rewrite {

namespace {
constexpr std::string_view kHeaderPrefix = "# ropscrub-rewritten";
}

std::string header_line() { return std::string(kHeaderPrefix) + " v" + std::string(kVersion); }

void to_json(nlohmann::json& j, const RewriteStats& s) {
  j = nlohmann::json{{"tool_version", s.tool_version},
                     {"immediates_split", s.immediates_split},
                     {"immediates_skipped", s.immediates_skipped},
                     {"functions_total", s.functions_total},
                     {"functions_instrumented", s.functions_instrumented},
                     {"rets_protected", s.rets_protected},
                     {"tail_jumps_protected", s.tail_jumps_protected},
                     {"opaque_lines", s.opaque_lines},
                     {"warnings", s.warnings}};
}

RewriteResult rewrite_file(std::string_view source, const RewriteOptions& opts) {
  RewriteResult result;
  result.stats.tool_version = std::string(kVersion);
  if (source.empty()) return result;

  std::string_view first_line = source.substr(0, source.find('\n'));
  if (first_line.starts_with(kHeaderPrefix))
    throw Error(ErrorCode::AlreadyRewritten, "input was already rewritten (" +
                                                 std::string(first_line) + ")");

  ParsedAssembly parsed = parse_assembly(source);
  auto& stats = result.stats;

  std::vector<Error> failures;
  for (auto& part : parsed.parts) {
    if (auto* inter = std::get_if<Interlude>(&part)) {
      for (const auto& r : inter->records) stats.opaque_lines += r.kind == RecordKind::opaque;
      continue;
    }
    auto& fn = std::get<FunctionSpan>(part);
    stats.functions_total++;
    for (const auto& r : fn.body) stats.opaque_lines += r.kind == RecordKind::opaque;

    PassReport report;
    try {
      if (opts.enable_imm) fn = pass_reencode_immediates(fn, opts, report);
    } catch (const Error& e) {
      failures.push_back(e);
      continue;
    }
    fn = pass_protect_returns(fn, opts, report);

    stats.immediates_split += report.immediates_split;
    stats.immediates_skipped += report.immediates_skipped;
    stats.rets_protected += report.rets_protected;
    stats.tail_jumps_protected += report.tail_jumps_protected;
    stats.functions_instrumented += report.instrumented;
    stats.warnings.insert(stats.warnings.end(), report.warnings.begin(), report.warnings.end());
  }

  if (failures.size() == 1) throw failures.front();
  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " immediates could not be re-encoded:";
    for (const auto& f : failures) msg += "\n  " + std::string(f.what());
    throw Error(ErrorCode::RewriteFailed, msg);
  }

  result.text = header_line() + "\n" + parsed.render();
  return result;
}

}  // namespace ropscrub::rewrite
