// Copyright 2026 The paostruct Authors.
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

#ifndef PAOSTRUCT_JSON_HPP_
#define PAOSTRUCT_JSON_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace paostruct {

// Insertion-ordered so every document we emit has a stable field order.
using Json = nlohmann::ordered_json;

// Parses a document; syntax errors become Error(kParseError) carrying the
// line, column and byte offset. `what` names the document in the message.
Json parse_json(std::string_view text, std::string_view what = "document");

// Compact single-line dump; UTF-8 passes through, invalid bytes replaced.
std::string dump_compact(const Json& j);

// Two-space indented dump with trailing newline.
std::string dump_pretty(const Json& j);

// Field accessors that throw Error(kParseError) with "path.key: reason".
const Json& require_field(const Json& obj, std::string_view key, std::string_view path);
std::string require_string(const Json& obj, std::string_view key, std::string_view path);
const Json& require_array(const Json& obj, std::string_view key, std::string_view path);
std::optional<std::string> optional_string(const Json& obj, std::string_view key,
                                           std::string_view path);

// Validates `value` against a JSON-Schema subset: type (string, number,
// integer, boolean, object, array, null, or a list of those), properties,
// required, additionalProperties (bool), items, enum, minItems, minLength,
// minimum, maximum.
// Returns the first violation as "path: reason", or nullopt when valid.
std::optional<std::string> validate_against_schema(const Json& value, const Json& schema,
                                                   const std::string& path = "$");

}  // namespace paostruct

#endif  // PAOSTRUCT_JSON_HPP_
