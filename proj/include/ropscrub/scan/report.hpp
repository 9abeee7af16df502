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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ropscrub/scan/gadgets.hpp"

namespace ropscrub::scan {

struct SectionIdentity {
  std::string name;
  std::uint64_t file_offset = 0;
  std::uint64_t virtual_address = 0;
  std::uint64_t size = 0;

  friend bool operator==(const SectionIdentity&, const SectionIdentity&) = default;
};

struct ScanReport {
  std::string tool_version;
  SectionIdentity section;
  std::size_t total_free_branch_bytes = 0;
  std::size_t gadget_count = 0;
  /// Free-branch bytes by kind; every kind is present, possibly zero.
  std::map<isa::FreeBranchKind, std::size_t> per_kind;
  std::size_t aligned_count = 0;
  std::size_t unaligned_count = 0;
  std::size_t unknown_count = 0;

  friend bool operator==(const ScanReport&, const ScanReport&) = default;
};

/// Counts free-branch bytes in `bytes` and tallies `gadgets` (already
/// classified and deduplicated) by alignment.
ScanReport summarize(const SectionIdentity& section, std::span<const std::uint8_t> bytes,
                     const std::vector<GadgetRecord>& gadgets);

/// Enumerates, classifies and summarizes one section. Duplicates are
/// collapsed per (bytes, alignment) after classification so the aligned and
/// unaligned tallies never absorb each other. `gadgets_out` receives the
/// classified list when non-null.
ScanReport scan_section(const SectionIdentity& section, std::span<const std::uint8_t> bytes,
                        const ScanOptions& opts, const BoundaryMap* map,
                        std::vector<GadgetRecord>* gadgets_out = nullptr);

struct FieldDelta {
  std::int64_t before = 0;
  std::int64_t after = 0;
  std::int64_t delta = 0;
  /// delta / before * 100; absent when before is zero.
  std::optional<double> percent;

  friend bool operator==(const FieldDelta&, const FieldDelta&) = default;
};

struct DiffReport {
  std::string tool_version;
  std::string section;
  /// Keyed by ScanReport field name; per-kind counts as "per_kind.<kind>".
  std::map<std::string, FieldDelta> fields;
  bool regression = false;

  friend bool operator==(const DiffReport&, const DiffReport&) = default;
};

/// Throws Error{SectionMismatch} when the reports name different sections.
DiffReport compare(const ScanReport& before, const ScanReport& after);

/// Matches sections by name; throws Error{SectionMismatch} unless both sides
/// hold the same set of names.
std::vector<DiffReport> compare_all(const std::vector<ScanReport>& before,
                                    const std::vector<ScanReport>& after);

/// "-83.4%" style rendering; "n/a" without a percentage.
std::string format_percent(const FieldDelta& d);

void to_json(nlohmann::json& j, const SectionIdentity& s);
void from_json(const nlohmann::json& j, SectionIdentity& s);
void to_json(nlohmann::json& j, const ScanReport& r);
/// Throws Error{SchemaMismatch} on missing or mistyped fields.
void from_json(const nlohmann::json& j, ScanReport& r);
void to_json(nlohmann::json& j, const FieldDelta& d);
void from_json(const nlohmann::json& j, FieldDelta& d);
void to_json(nlohmann::json& j, const DiffReport& r);
void from_json(const nlohmann::json& j, DiffReport& r);
void to_json(nlohmann::json& j, const GadgetRecord& g);

/// Accepts a single report object or an array of them.
std::vector<ScanReport> parse_scan_reports(const nlohmann::json& j);

}  // namespace ropscrub::scan
