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

#include <cstdlib>
#include <thread>

#include "http_util.hpp"
#include "paostruct/error.hpp"
#include "paostruct/llm.hpp"

namespace paostruct::llm {

RemoteEngine::RemoteEngine(EngineConfig config)
    : config_(std::move(config)), bucket_(config_.requests_per_second, config_.burst) {
  config_.validate();
  http::split_url(config_.endpoint_url);  // fail at construction, not first call
}

Json RemoteEngine::build_request(const EngineConfig& config, const std::vector<ChatMessage>& conversation) {
  Json messages = Json::array();
  for (const auto& m : conversation) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", config.model_id},
          {"messages", std::move(messages)},
          {"temperature", config.temperature},
          {"max_tokens", config.max_output_tokens}};
}

std::string RemoteEngine::parse_response(const Json& body, const ReasoningDelimiters& delims) {
  const auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) {
    throw Error(ErrorCode::kEngineUnavailable, "response has no choices");
  }
  const Json& message = (*choices)[0].value("message", Json::object());
  std::string content;
  if (auto c = message.find("content"); c != message.end() && c->is_string()) content = c->get<std::string>();
  // Servers that split reasoning out return it under one of these names.
  for (const char* key : {"reasoning_content", "reasoning"}) {
    if (auto r = message.find(key); r != message.end() && r->is_string() && !r->get<std::string>().empty()) {
      return delims.open + r->get<std::string>() + delims.close + content;
    }
  }
  return content;
}

std::string RemoteEngine::generate(const std::vector<ChatMessage>& conversation) {
  const http::Target target = http::split_url(config_.endpoint_url);
  auto client = http::make_client(target, config_.request_timeout);

  httplib::Headers headers;
  for (const auto& [k, v] : config_.headers) headers.emplace(k, v);
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = dump_compact(build_request(config_, conversation));

  std::string last_failure = "no attempt made";
  auto backoff = config_.retry.initial_backoff;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * config_.retry.backoff_multiplier));
    }
    bucket_.acquire();
    auto res = client->Post(target.path, headers, body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      Json parsed;
      try {
        parsed = Json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kEngineUnavailable, std::string("unparseable response body: ") + e.what());
      }
      return parse_response(parsed, config_.reasoning);
    }
    last_failure = "HTTP " + std::to_string(res->status);
    if (!http::is_transient(res->status)) break;
  }
  throw Error(ErrorCode::kEngineUnavailable,
              config_.endpoint_url + " failed after retries (" + last_failure + ")");
}

}  // namespace paostruct::llm
