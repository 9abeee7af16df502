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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ropscrub/scan/gadgets.hpp"

namespace ropscrub::io {

struct Section {
  std::string name;
  std::uint64_t file_offset = 0;
  std::uint64_t virtual_address = 0;
  std::vector<std::uint8_t> bytes;
  bool executable = false;
};

/// Whole file contents. Throws Error{IoFailure}.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Every SHF_EXECINSTR section of a 64-bit little-endian ELF file. A file
/// without section headers falls back to executable PT_LOAD segments, named
/// "PT_LOAD[i]". Throws Error{NotElf, UnsupportedClass, TruncatedFile,
/// MalformedHeader, IoFailure}.
std::vector<Section> load_elf_exec_sections(const std::filesystem::path& path);

/// Same, over an in-memory image.
std::vector<Section> parse_elf_exec_sections(std::span<const std::uint8_t> image);

/// The whole file as one executable section named "flat".
Section load_flat(const std::filesystem::path& path);

/// {"starts": [ints]}. Throws Error{SchemaMismatch} or Error{IoFailure}.
scan::BoundaryMap read_boundary_map(const std::filesystem::path& path);
void write_boundary_map(const std::filesystem::path& path, const scan::BoundaryMap& map);

}  // namespace ropscrub::io
