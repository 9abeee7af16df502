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

#include "ropscrub/scan/report.hpp"

#include <cstdio>
#include <set>

#include "ropscrub/error.hpp"
#include "ropscrub/version.hpp"

namespace ropscrub::scan {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name))
    throw Error(ErrorCode::SchemaMismatch, std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::SchemaMismatch, std::string("field '") + name + "' has the wrong type");
  }
}

FieldDelta delta(std::size_t before, std::size_t after) {
  FieldDelta d;
  d.before = static_cast<std::int64_t>(before);
  d.after = static_cast<std::int64_t>(after);
  d.delta = d.after - d.before;
  if (d.before != 0) d.percent = static_cast<double>(d.delta) / static_cast<double>(d.before) * 100.0;
  return d;
}

}  // namespace

ScanReport summarize(const SectionIdentity& section, std::span<const std::uint8_t> bytes,
                     const std::vector<GadgetRecord>& gadgets) {
  ScanReport r;
  r.tool_version = std::string(kVersion);
  r.section = section;
  for (auto k : isa::kAllFreeBranchKinds) r.per_kind[k] = 0;
  for (const auto& hit : isa::contains_forbidden(bytes)) {
    r.per_kind[hit.kind]++;
    r.total_free_branch_bytes++;
  }
  r.gadget_count = gadgets.size();
  for (const auto& g : gadgets) {
    switch (g.alignment) {
      case Alignment::aligned: r.aligned_count++; break;
      case Alignment::unaligned: r.unaligned_count++; break;
      case Alignment::unknown: r.unknown_count++; break;
    }
  }
  return r;
}

ScanReport scan_section(const SectionIdentity& section, std::span<const std::uint8_t> bytes,
                        const ScanOptions& opts, const BoundaryMap* map,
                        std::vector<GadgetRecord>* gadgets_out) {
  ScanOptions raw = opts;
  raw.dedupe = false;
  auto gadgets = classify(enumerate_gadgets(bytes, raw), map);
  if (opts.dedupe) gadgets = dedupe_gadgets(std::move(gadgets), /*by_alignment=*/true);
  auto report = summarize(section, bytes, gadgets);
  if (gadgets_out) *gadgets_out = std::move(gadgets);
  return report;
}

DiffReport compare(const ScanReport& before, const ScanReport& after) {
  if (before.section.name != after.section.name)
    throw Error(ErrorCode::SectionMismatch, "cannot compare section '" + before.section.name +
                                                "' with '" + after.section.name + "'");
  DiffReport d;
  d.tool_version = std::string(kVersion);
  d.section = before.section.name;
  d.fields["total_free_branch_bytes"] =
      delta(before.total_free_branch_bytes, after.total_free_branch_bytes);
  d.fields["gadget_count"] = delta(before.gadget_count, after.gadget_count);
  d.fields["aligned_count"] = delta(before.aligned_count, after.aligned_count);
  d.fields["unaligned_count"] = delta(before.unaligned_count, after.unaligned_count);
  d.fields["unknown_count"] = delta(before.unknown_count, after.unknown_count);
  for (auto k : isa::kAllFreeBranchKinds) {
    auto get = [k](const ScanReport& r) {
      auto it = r.per_kind.find(k);
      return it == r.per_kind.end() ? std::size_t{0} : it->second;
    };
    d.fields["per_kind." + std::string(isa::to_string(k))] = delta(get(before), get(after));
  }
  for (const auto& [name, f] : d.fields) d.regression = d.regression || f.delta > 0;
  return d;
}

std::vector<DiffReport> compare_all(const std::vector<ScanReport>& before,
                                    const std::vector<ScanReport>& after) {
  std::set<std::string> a, b;
  for (const auto& r : before) a.insert(r.section.name);
  for (const auto& r : after) b.insert(r.section.name);
  if (a != b || a.size() != before.size() || b.size() != after.size())
    throw Error(ErrorCode::SectionMismatch, "reports cover different sections");
  std::vector<DiffReport> out;
  for (const auto& r : before) {
    for (const auto& s : after)
      if (s.section.name == r.section.name) out.push_back(compare(r, s));
  }
  return out;
}

std::string format_percent(const FieldDelta& d) {
  if (!d.percent) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", *d.percent);
  return buf;
}

void to_json(json& j, const SectionIdentity& s) {
  j = json{{"name", s.name},
           {"file_offset", s.file_offset},
           {"virtual_address", s.virtual_address},
           {"size", s.size}};
}

void from_json(const json& j, SectionIdentity& s) {
  s.name = field<std::string>(j, "name");
  s.file_offset = field<std::uint64_t>(j, "file_offset");
  s.virtual_address = field<std::uint64_t>(j, "virtual_address");
  s.size = field<std::uint64_t>(j, "size");
}

void to_json(json& j, const ScanReport& r) {
  json kinds = json::object();
  for (const auto& [k, n] : r.per_kind) kinds[std::string(isa::to_string(k))] = n;
  j = json{{"tool_version", r.tool_version},
           {"section", r.section},
           {"total_free_branch_bytes", r.total_free_branch_bytes},
           {"gadget_count", r.gadget_count},
           {"per_kind", kinds},
           {"aligned_count", r.aligned_count},
           {"unaligned_count", r.unaligned_count},
           {"unknown_count", r.unknown_count}};
}

void from_json(const json& j, ScanReport& r) {
  r.tool_version = field<std::string>(j, "tool_version");
  if (!j.contains("section")) throw Error(ErrorCode::SchemaMismatch, "missing field 'section'");
  from_json(j.at("section"), r.section);
  r.total_free_branch_bytes = field<std::size_t>(j, "total_free_branch_bytes");
  r.gadget_count = field<std::size_t>(j, "gadget_count");
  r.aligned_count = field<std::size_t>(j, "aligned_count");
  r.unaligned_count = field<std::size_t>(j, "unaligned_count");
  r.unknown_count = field<std::size_t>(j, "unknown_count");
  auto kinds = field<json>(j, "per_kind");
  if (!kinds.is_object()) throw Error(ErrorCode::SchemaMismatch, "per_kind must be an object");
  r.per_kind.clear();
  for (auto k : isa::kAllFreeBranchKinds) r.per_kind[k] = 0;
  for (const auto& [name, n] : kinds.items()) {
    auto k = isa::free_branch_kind_from_string(name);
    if (!k || !n.is_number_unsigned())
      throw Error(ErrorCode::SchemaMismatch, "bad per_kind entry '" + name + "'");
    r.per_kind[*k] = n.get<std::size_t>();
  }
  if (r.aligned_count + r.unaligned_count + r.unknown_count != r.gadget_count)
    throw Error(ErrorCode::SchemaMismatch, "alignment counts do not add up to gadget_count");
}

void to_json(json& j, const FieldDelta& d) {
  j = json{{"before", d.before}, {"after", d.after}, {"delta", d.delta}};
  j["percent"] = d.percent ? json(*d.percent) : json(nullptr);
}

void from_json(const json& j, FieldDelta& d) {
  d.before = field<std::int64_t>(j, "before");
  d.after = field<std::int64_t>(j, "after");
  d.delta = field<std::int64_t>(j, "delta");
  auto p = field<json>(j, "percent");
  d.percent = p.is_null() ? std::nullopt : std::optional<double>(p.get<double>());
}

void to_json(json& j, const DiffReport& r) {
  j = json{{"tool_version", r.tool_version},
           {"section", r.section},
           {"fields", r.fields},
           {"regression", r.regression}};
}

void from_json(const json& j, DiffReport& r) {
  r.tool_version = field<std::string>(j, "tool_version");
  r.section = field<std::string>(j, "section");
  r.fields = field<std::map<std::string, FieldDelta>>(j, "fields");
  r.regression = field<bool>(j, "regression");
}

void to_json(json& j, const GadgetRecord& g) {
  std::string hex;
  char buf[4];
  for (auto b : g.bytes) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  j = json{{"start_offset", g.start_offset},
           {"end_offset", g.end_offset},
           {"bytes", hex},
           {"instructions", g.instructions},
           {"kind", isa::to_string(g.kind)},
           {"aligned", to_string(g.alignment)}};
}

std::vector<ScanReport> parse_scan_reports(const json& j) {
  std::vector<ScanReport> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(e.get<ScanReport>());
  } else {
    out.push_back(j.get<ScanReport>());
  }
  return out;
}

}  // namespace ropscrub::scan
