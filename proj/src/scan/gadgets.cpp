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

#include "ropscrub/scan/gadgets.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "ropscrub/error.hpp"
#include "ropscrub/isa/decoder.hpp"

namespace ropscrub::scan {

namespace {

// All gadgets ending at the free-branch byte at `f`.
std::vector<GadgetRecord> gadgets_at(std::span<const std::uint8_t> buf, std::size_t f,
                                     const ScanOptions& opts) {
  std::vector<GadgetRecord> out;
  const auto branch = isa::decode_length(buf, f);
  if (!branch.decoded() || branch.flow != isa::Flow::free_branch) return out;
  if (branch.length > opts.max_window) return out;
  const std::size_t end = f + branch.length - 1;
  const std::size_t lowest = end + 1 > opts.max_window ? end + 1 - opts.max_window : 0;

  for (std::size_t s = f + 1; s-- > lowest;) {
    GadgetRecord g;
    std::size_t pos = s;
    bool ok = true;
    while (pos < f) {
      auto d = isa::decode_length(buf, pos);
      if (!d.decoded() || d.flow != isa::Flow::sequential ||
          g.instructions.size() + 1 >= opts.max_instructions) {
        ok = false;
        break;
      }
      g.instructions.push_back(d.summary());
      g.instruction_offsets.push_back(pos);
      pos += d.length;
    }
    if (!ok || pos != f) continue;
    g.instructions.push_back(branch.summary());
    g.instruction_offsets.push_back(f);
    g.start_offset = s;
    g.end_offset = end;
    g.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(s),
                   buf.begin() + static_cast<std::ptrdiff_t>(end + 1));
    g.kind = *isa::free_branch_kind(buf[f]);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::size_t> free_branch_offsets(std::span<const std::uint8_t> buf) {
  std::vector<std::size_t> out;
  for (const auto& hit : isa::contains_forbidden(buf)) out.push_back(hit.offset);
  return out;
}

}  // namespace

std::string_view to_string(Alignment a) {
  switch (a) {
    case Alignment::aligned: return "aligned";
    case Alignment::unaligned: return "unaligned";
    case Alignment::unknown: return "unknown";
  }
  return "unknown";
}

void ScanOptions::validate() const {
  if (max_instructions < 1) throw Error(ErrorCode::InvalidArgument, "max_instructions must be >= 1");
  if (max_window < 1) throw Error(ErrorCode::InvalidArgument, "max_window must be >= 1");
}

BoundaryMap::BoundaryMap(std::vector<std::size_t> starts) : starts_(std::move(starts)) {
  std::sort(starts_.begin(), starts_.end());
  starts_.erase(std::unique(starts_.begin(), starts_.end()), starts_.end());
}

bool BoundaryMap::contains(std::size_t offset) const {
  return std::binary_search(starts_.begin(), starts_.end(), offset);
}

void BoundaryMap::check_within(std::size_t size) const {
  if (!starts_.empty() && starts_.back() >= size)
    throw Error(ErrorCode::InvalidArgument, "boundary " + std::to_string(starts_.back()) +
                                                " is outside a buffer of " +
                                                std::to_string(size) + " bytes");
}

std::vector<GadgetRecord> enumerate_gadgets_serial(std::span<const std::uint8_t> buf,
                                                   const ScanOptions& opts) {
  opts.validate();
  std::vector<GadgetRecord> out;
  for (std::size_t f : free_branch_offsets(buf)) {
    auto part = gadgets_at(buf, f, opts);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return opts.dedupe ? dedupe_gadgets(std::move(out)) : out;
}

std::vector<GadgetRecord> enumerate_gadgets(std::span<const std::uint8_t> buf,
                                            const ScanOptions& opts) {
  opts.validate();
  const auto offsets = free_branch_offsets(buf);
  const auto n = static_cast<std::ptrdiff_t>(offsets.size());
  std::vector<std::vector<GadgetRecord>> parts(offsets.size());

  // The decoder's table is resolved once up front so worker threads only read it.
  (void)isa::decode_length(buf, 0);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    parts[static_cast<std::size_t>(i)] = gadgets_at(buf, offsets[static_cast<std::size_t>(i)], opts);

  std::vector<GadgetRecord> out;
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return opts.dedupe ? dedupe_gadgets(std::move(out)) : out;
}

std::vector<GadgetRecord> dedupe_gadgets(std::vector<GadgetRecord> gadgets, bool by_alignment) {
  std::set<std::pair<std::vector<std::uint8_t>, int>> seen;
  std::vector<GadgetRecord> out;
  out.reserve(gadgets.size());
  for (auto& g : gadgets) {
    int key = by_alignment ? static_cast<int>(g.alignment) : 0;
    if (seen.emplace(g.bytes, key).second) out.push_back(std::move(g));
  }
  return out;
}

std::vector<GadgetRecord> classify(std::vector<GadgetRecord> gadgets, const BoundaryMap* map) {
  for (auto& g : gadgets) {
    if (!map) {
      g.alignment = Alignment::unknown;
      continue;
    }
    bool aligned = map->contains(g.start_offset);
    for (auto off : g.instruction_offsets) aligned = aligned && map->contains(off);
    g.alignment = aligned ? Alignment::aligned : Alignment::unaligned;
  }
  return gadgets;
}

BoundaryMap linear_boundaries(std::span<const std::uint8_t> buf, std::size_t entry) {
  std::vector<std::size_t> starts;
  std::size_t pos = entry;
  while (pos < buf.size()) {
    auto d = isa::decode_length(buf, pos);
    if (!d.decoded()) break;
    starts.push_back(pos);
    pos += d.length;
  }
  return BoundaryMap(std::move(starts));
}

BoundaryMap sweep_boundaries(std::span<const std::uint8_t> buf) {
  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  while (pos < buf.size()) {
    auto d = isa::decode_length(buf, pos);
    if (!d.decoded()) {
      ++pos;
      continue;
    }
    starts.push_back(pos);
    pos += d.length;
  }
  return BoundaryMap(std::move(starts));
}

}  // namespace ropscrub::scan
