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

#ifndef PAOSTRUCT_ERROR_HPP_
#define PAOSTRUCT_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace paostruct {

// Error taxonomy shared by every module. Codes are stable strings on the wire
// and in trace files; see to_string().
enum class ErrorCode {
  kParseError,
  kInvalidArgument,
  kConfigError,
  kNotFound,
  // Tool protocol.
  kToolNotFound,
  kInvalidParams,
  kToolError,
  kTimeout,
  kFrameError,
  kConnectionError,
  // Language engine.
  kEngineUnavailable,
  kMalformedOutput,
  kStubUnsupported,
  // Agent loop.
  kBudgetExceeded,
  kPlanFailed,
  // Tools and their backends.
  kAnnotatorUnavailable,
  kCacheCorrupt,
  kInvalidCategory,
  kInvalidReport,
  // Evaluation.
  kEmptyCorpus,
  kEmptyInput,
};

std::string_view to_string(ErrorCode code);

// Inverse of to_string(); unknown names map to kToolError.
ErrorCode error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const { return code_; }

  // Message without the code prefix.
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace paostruct

#endif  // PAOSTRUCT_ERROR_HPP_
