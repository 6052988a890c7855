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

#include "paostruct/error.hpp"

#include <array>
#include <utility>

namespace paostruct {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 21> kNames = {{
    {ErrorCode::kParseError, "PARSE_ERROR"},
    {ErrorCode::kInvalidArgument, "INVALID_ARGUMENT"},
    {ErrorCode::kConfigError, "CONFIG_ERROR"},
    {ErrorCode::kNotFound, "NOT_FOUND"},
    {ErrorCode::kToolNotFound, "TOOL_NOT_FOUND"},
    {ErrorCode::kInvalidParams, "INVALID_PARAMS"},
    {ErrorCode::kToolError, "TOOL_ERROR"},
    {ErrorCode::kTimeout, "TIMEOUT"},
    {ErrorCode::kFrameError, "FRAME_ERROR"},
    {ErrorCode::kConnectionError, "CONNECTION_ERROR"},
    {ErrorCode::kEngineUnavailable, "ENGINE_UNAVAILABLE"},
    {ErrorCode::kMalformedOutput, "MALFORMED_OUTPUT"},
    {ErrorCode::kStubUnsupported, "STUB_UNSUPPORTED"},
    {ErrorCode::kBudgetExceeded, "BUDGET_EXCEEDED"},
    {ErrorCode::kPlanFailed, "PLAN_FAILED"},
    {ErrorCode::kAnnotatorUnavailable, "ANNOTATOR_UNAVAILABLE"},
    {ErrorCode::kCacheCorrupt, "CACHE_CORRUPT"},
    {ErrorCode::kInvalidCategory, "INVALID_CATEGORY"},
    {ErrorCode::kInvalidReport, "INVALID_REPORT"},
    {ErrorCode::kEmptyCorpus, "EMPTY_CORPUS"},
    {ErrorCode::kEmptyInput, "EMPTY_INPUT"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "UNKNOWN";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::kToolError;
}

}  // namespace paostruct
