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
#include <span>
#include <string>
#include <vector>

#include "ropscrub/isa/forbidden.hpp"

namespace ropscrub::scan {

enum class Alignment { aligned, unaligned, unknown };

std::string_view to_string(Alignment a);

struct ScanOptions {
  std::size_t max_instructions = 6;
  /// Longest gadget in bytes, free branch included.
  std::size_t max_window = 20;
  bool dedupe = true;

  /// Throws Error{InvalidArgument} when a limit is zero.
  void validate() const;
};

struct GadgetRecord {
  std::size_t start_offset = 0;
  std::size_t end_offset = 0;                    // last byte of the free branch
  std::vector<std::uint8_t> bytes;
  std::vector<std::string> instructions;         // decoder summaries
  std::vector<std::size_t> instruction_offsets;  // absolute, one per instruction
  isa::FreeBranchKind kind = isa::FreeBranchKind::Ret;
  Alignment alignment = Alignment::unknown;

  friend bool operator==(const GadgetRecord&, const GadgetRecord&) = default;
};

/// Byte offsets where intended instructions begin.
class BoundaryMap {
 public:
  BoundaryMap() = default;
  /// Sorts and deduplicates.
  explicit BoundaryMap(std::vector<std::size_t> starts);

  const std::vector<std::size_t>& starts() const { return starts_; }
  bool contains(std::size_t offset) const;
  /// Throws Error{InvalidArgument} if any start is at or beyond `size`.
  void check_within(std::size_t size) const;

  friend bool operator==(const BoundaryMap&, const BoundaryMap&) = default;

 private:
  std::vector<std::size_t> starts_;
};

/// Every decodable instruction run that ends exactly on a ret-family byte,
/// fits in `max_window` bytes and holds at most `max_instructions`
/// instructions. Runs through a jump, call or earlier free branch are not
/// gadgets. Ordered by free-branch offset, then by start offset descending.
/// Free-branch offsets are processed in parallel.
std::vector<GadgetRecord> enumerate_gadgets(std::span<const std::uint8_t> buf,
                                            const ScanOptions& opts = {});

/// Single-threaded reference for enumerate_gadgets; same output.
std::vector<GadgetRecord> enumerate_gadgets_serial(std::span<const std::uint8_t> buf,
                                                   const ScanOptions& opts = {});

/// Drops later records whose byte string was already seen. With
/// `by_alignment`, records that differ only in alignment are both kept.
std::vector<GadgetRecord> dedupe_gadgets(std::vector<GadgetRecord> gadgets,
                                         bool by_alignment = false);

/// Sets alignment from the map: aligned iff every instruction start is a
/// boundary. Without a map every record becomes unknown.
std::vector<GadgetRecord> classify(std::vector<GadgetRecord> gadgets, const BoundaryMap* map);

/// Instruction starts of one linear decode from `entry`, stopping at the
/// first undecodable byte or the end of the buffer.
BoundaryMap linear_boundaries(std::span<const std::uint8_t> buf, std::size_t entry);

/// Linear decode of the whole buffer that steps one byte forward over
/// anything undecodable and carries on. Used when no boundary map is given.
BoundaryMap sweep_boundaries(std::span<const std::uint8_t> buf);

}  // namespace ropscrub::scan
