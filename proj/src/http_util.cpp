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

#include "http_util.hpp"

#include "paostruct/error.hpp"

namespace paostruct::http {

Target split_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "URL lacks a scheme: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::kConfigError, "unsupported URL scheme '" + scheme + "'");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") {
    throw Error(ErrorCode::kConfigError, "https endpoint configured but this build has no TLS support");
  }
#endif
  const std::size_t path_start = url.find('/', scheme_end + 3);
  Target t;
  t.origin = url.substr(0, path_start);
  t.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (t.origin.size() <= scheme_end + 3) throw Error(ErrorCode::kConfigError, "URL lacks a host: " + url);
  return t;
}

std::unique_ptr<httplib::Client> make_client(const Target& target, std::chrono::milliseconds timeout) {
  auto client = std::make_unique<httplib::Client>(target.origin);
  client->set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                 static_cast<long>((timeout.count() % 1000) * 1000));
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  return client;
}

bool is_transient(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace paostruct::http
