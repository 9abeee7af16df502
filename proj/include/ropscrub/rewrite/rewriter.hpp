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
#include <vector>

#include <json.hpp>

#include "ropscrub/rewrite/passes.hpp"

namespace ropscrub::rewrite {

/// First line of every rewritten file; its presence makes a second rewrite
/// fail with AlreadyRewritten.
std::string header_line();

struct RewriteStats {
  std::string tool_version;
  std::size_t immediates_split = 0;
  std::size_t immediates_skipped = 0;
  std::size_t functions_total = 0;
  std::size_t functions_instrumented = 0;
  std::size_t rets_protected = 0;
  std::size_t tail_jumps_protected = 0;
  std::size_t opaque_lines = 0;
  std::vector<std::string> warnings;
};

void to_json(nlohmann::json& j, const RewriteStats& s);

struct RewriteResult {
  std::string text;
  RewriteStats stats;
};

/// Runs the immediate pass and the return-protection pass over every
/// function. Split failures from all functions are collected and thrown
/// together as Error{RewriteFailed}; the first failure's code is kept when
/// there is only one. An empty source gives an empty result.
RewriteResult rewrite_file(std::string_view source, const RewriteOptions& opts = {});

}  // namespace ropscrub::rewrite
