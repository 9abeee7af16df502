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

#include <optional>
#include <string_view>

#include "ropscrub/rewrite/record.hpp"

namespace ropscrub::rewrite {

/// Splits GNU as AT&T source into records and groups them into function
/// spans. Every input line ends up in exactly one record, so rendering an
/// unmodified parse reproduces the input byte for byte.
///
/// Function boundaries come from `.type name, @function` ... `.size name`.
/// Without `.type`, global labels start functions; without those, any
/// non-local label directly followed by code does.
///
/// Throws Error{MalformedSource} for an unterminated string or block comment.
ParsedAssembly parse_assembly(std::string_view source);

/// Parses one operand as written in AT&T syntax. Returns nullopt for text
/// that is not a well-formed operand (unbalanced parentheses, empty).
std::optional<AsmOperand> parse_operand(std::string_view text);

/// gas integer literal: decimal, 0x hex, 0b binary, 0 octal, optional sign.
std::optional<std::int64_t> parse_integer(std::string_view text);

}  // namespace ropscrub::rewrite
