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

#include <cstring>

#include "ropscrub/error.hpp"
#include "ropscrub/io/binary_io.hpp"

namespace ropscrub::io {

namespace {

constexpr std::uint64_t kShfExecinstr = 0x4;
constexpr std::uint32_t kShtNobits = 8;
constexpr std::uint32_t kPtLoad = 1;
constexpr std::uint32_t kPfX = 1;
constexpr std::size_t kEhdrSize = 64;
constexpr std::size_t kShdrSize = 64;
constexpr std::size_t kPhdrSize = 56;

template <typename T>
T read_le(std::span<const std::uint8_t> image, std::uint64_t offset) {
  if (offset > image.size() || image.size() - offset < sizeof(T))
    throw Error(ErrorCode::TruncatedFile, "read past end of file at offset " +
                                              std::to_string(offset));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<T>(image[offset + i]) << (8 * i));
  return v;
}

std::span<const std::uint8_t> region(std::span<const std::uint8_t> image, std::uint64_t offset,
                                     std::uint64_t size, const std::string& what) {
  if (offset > image.size() || size > image.size() - offset)
    throw Error(ErrorCode::TruncatedFile, what + " extends past end of file");
  return image.subspan(offset, size);
}

std::vector<Section> program_header_fallback(std::span<const std::uint8_t> image) {
  const auto phoff = read_le<std::uint64_t>(image, 0x20);
  const auto phentsize = read_le<std::uint16_t>(image, 0x36);
  const auto phnum = read_le<std::uint16_t>(image, 0x38);
  std::vector<Section> out;
  if (phnum == 0) return out;
  if (phentsize < kPhdrSize) throw Error(ErrorCode::MalformedHeader, "e_phentsize too small");
  region(image, phoff, std::uint64_t{phentsize} * phnum, "program header table");
  for (std::uint16_t i = 0; i < phnum; ++i) {
    const std::uint64_t ph = phoff + std::uint64_t{i} * phentsize;
    if (read_le<std::uint32_t>(image, ph) != kPtLoad) continue;
    if (!(read_le<std::uint32_t>(image, ph + 4) & kPfX)) continue;
    Section s;
    s.name = "PT_LOAD[" + std::to_string(i) + "]";
    s.file_offset = read_le<std::uint64_t>(image, ph + 8);
    s.virtual_address = read_le<std::uint64_t>(image, ph + 0x10);
    auto bytes = region(image, s.file_offset, read_le<std::uint64_t>(image, ph + 0x20), s.name);
    s.bytes.assign(bytes.begin(), bytes.end());
    s.executable = true;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<Section> parse_elf_exec_sections(std::span<const std::uint8_t> image) {
  static constexpr std::uint8_t kMagic[4] = {0x7f, 'E', 'L', 'F'};
  if (image.size() < 4) throw Error(ErrorCode::TruncatedFile, "file is shorter than the ELF magic");
  if (std::memcmp(image.data(), kMagic, 4) != 0) throw Error(ErrorCode::NotElf, "not an ELF file");
  if (image.size() < 6) throw Error(ErrorCode::TruncatedFile, "ELF identification is truncated");
  if (image[4] != 2) throw Error(ErrorCode::UnsupportedClass, "only ELFCLASS64 is supported");
  if (image[5] != 1) throw Error(ErrorCode::UnsupportedClass, "only little-endian ELF is supported");
  if (image.size() < kEhdrSize) throw Error(ErrorCode::TruncatedFile, "ELF header is truncated");

  const auto shoff = read_le<std::uint64_t>(image, 0x28);
  const auto shentsize = read_le<std::uint16_t>(image, 0x3a);
  const auto shnum = read_le<std::uint16_t>(image, 0x3c);
  const auto shstrndx = read_le<std::uint16_t>(image, 0x3e);

  if (shoff == 0 || shnum == 0) return program_header_fallback(image);
  if (shentsize < kShdrSize) throw Error(ErrorCode::MalformedHeader, "e_shentsize too small");
  region(image, shoff, std::uint64_t{shentsize} * shnum, "section header table");
  if (shstrndx >= shnum) throw Error(ErrorCode::MalformedHeader, "e_shstrndx out of range");

  auto header = [&](std::uint16_t i) { return shoff + std::uint64_t{i} * shentsize; };
  const auto strtab = region(image, read_le<std::uint64_t>(image, header(shstrndx) + 0x18),
                             read_le<std::uint64_t>(image, header(shstrndx) + 0x20),
                             "section name table");

  std::vector<Section> out;
  for (std::uint16_t i = 0; i < shnum; ++i) {
    const auto sh = header(i);
    const auto flags = read_le<std::uint64_t>(image, sh + 0x08);
    if (!(flags & kShfExecinstr)) continue;

    const auto name_off = read_le<std::uint32_t>(image, sh);
    if (name_off >= strtab.size())
      throw Error(ErrorCode::MalformedHeader, "section name offset out of range");
    const auto* name_begin = reinterpret_cast<const char*>(strtab.data()) + name_off;
    const auto name_len = ::strnlen(name_begin, strtab.size() - name_off);
    if (name_off + name_len >= strtab.size())
      throw Error(ErrorCode::MalformedHeader, "section name is not terminated");

    Section s;
    s.name.assign(name_begin, name_len);
    s.virtual_address = read_le<std::uint64_t>(image, sh + 0x10);
    s.file_offset = read_le<std::uint64_t>(image, sh + 0x18);
    s.executable = true;
    if (read_le<std::uint32_t>(image, sh + 4) != kShtNobits) {
      auto bytes = region(image, s.file_offset, read_le<std::uint64_t>(image, sh + 0x20), s.name);
      s.bytes.assign(bytes.begin(), bytes.end());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Section> load_elf_exec_sections(const std::filesystem::path& path) {
  const auto image = read_file(path);
  return parse_elf_exec_sections(image);
}

}  // namespace ropscrub::io
