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

// Shared helpers for the two HTTP clients (chat engine, ontology annotator).
// Only included from .cpp files so httplib stays out of public headers.

#ifndef PAOSTRUCT_SRC_HTTP_UTIL_HPP_
#define PAOSTRUCT_SRC_HTTP_UTIL_HPP_

#include <chrono>
#include <memory>
#include <string>

#include <httplib.h>

namespace paostruct::http {

struct Target {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

// Throws Error(kConfigError) for anything but http:// or https:// URLs, and
// for https when the build lacks TLS support.
Target split_url(const std::string& url);

std::unique_ptr<httplib::Client> make_client(const Target& target, std::chrono::milliseconds timeout);

// True for statuses worth retrying: 408, 429 and 5xx.
bool is_transient(int status);

}  // namespace paostruct::http

#endif  // PAOSTRUCT_SRC_HTTP_UTIL_HPP_
