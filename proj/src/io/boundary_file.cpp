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

#include <json.hpp>

#include "ropscrub/error.hpp"
#include "ropscrub/io/binary_io.hpp"

namespace ropscrub::io {

scan::BoundaryMap read_boundary_map(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("starts") || !j["starts"].is_array())
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": expected {\"starts\": [...]}");
  std::vector<std::size_t> starts;
  for (const auto& v : j["starts"]) {
    if (!v.is_number_unsigned())
      throw Error(ErrorCode::SchemaMismatch, path.string() + ": starts must be non-negative integers");
    starts.push_back(v.get<std::size_t>());
  }
  for (std::size_t i = 1; i < starts.size(); ++i)
    if (starts[i] <= starts[i - 1])
      throw Error(ErrorCode::SchemaMismatch, path.string() + ": starts must be strictly ascending");
  return scan::BoundaryMap(std::move(starts));
}

void write_boundary_map(const std::filesystem::path& path, const scan::BoundaryMap& map) {
  nlohmann::json j{{"starts", map.starts()}};
  write_text_file(path, j.dump() + "\n");
}

}  // namespace ropscrub::io
