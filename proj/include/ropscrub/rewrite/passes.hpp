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
#include <cstdint>
#include <string>
#include <vector>

#include "ropscrub/isa/instruction.hpp"
#include "ropscrub/rewrite/record.hpp"
#include "ropscrub/split/immediate_split.hpp"

namespace ropscrub::rewrite {

struct RewriteOptions {
  bool enable_encrypt = true;
  bool enable_sled = true;
  bool enable_imm = true;
  std::size_t sled_length = 16;
  isa::Segment canary_segment = isa::Segment::fs;
  std::int64_t canary_offset = 0x28;
  /// Register that carries the canary in the encrypt/decrypt pair. The
  /// fallback is used before a tail jump that reads the primary.
  isa::Gpr key_register = isa::Gpr::r11;
  isa::Gpr key_fallback = isa::Gpr::r10;
  std::vector<isa::Gpr> scratch_order{split::default_scratch_order().begin(),
                                      split::default_scratch_order().end()};
  std::int64_t red_zone = split::kDefaultRedZone;
};

/// Counters and diagnostics a pass adds to as it runs.
struct PassReport {
  std::size_t immediates_split = 0;
  std::size_t immediates_skipped = 0;
  std::size_t rets_protected = 0;
  std::size_t tail_jumps_protected = 0;
  bool instrumented = false;
  std::vector<std::string> warnings;
};

/// The two instructions that xor the canary into the return address.
/// Encrypting and decrypting are the same operation.
std::vector<isa::SubsetInstruction> canary_pair(const RewriteOptions& opts, isa::Gpr key);

/// Replaces mov/add/sub/and/or/xor/cmp/test whose immediate holds a
/// ret-family byte with a split sequence. Throws Error{NoCleanSplit} or
/// Error{ScratchExhausted} (message prefixed with the source line) when a
/// register-destination immediate cannot be split.
FunctionSpan pass_reencode_immediates(const FunctionSpan& fn, const RewriteOptions& opts,
                                      PassReport& report);

/// Inserts the canary xor at entry and a nop sled plus the canary xor in
/// front of every return and tail jump. Functions without a return are
/// left alone.
FunctionSpan pass_protect_returns(const FunctionSpan& fn, const RewriteOptions& opts,
                                  PassReport& report);

}  // namespace ropscrub::rewrite
