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

#include "paostruct/mcp.hpp"

namespace paostruct::mcp {

namespace {

Error frame_error(std::size_t offset, const std::string& what) {
  return Error(ErrorCode::kFrameError, "at byte " + std::to_string(offset) + ": " + what);
}

Message envelope_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kFrameError, "envelope is not an object");
  auto version = j.find("jsonrpc");
  if (version == j.end() || *version != "2.0") {
    throw Error(ErrorCode::kFrameError, "missing or unsupported jsonrpc version");
  }
  auto id = j.find("id");
  if (id == j.end() || !id->is_number_integer()) {
    throw Error(ErrorCode::kFrameError, "missing integer id");
  }

  auto method = j.find("method");
  auto result = j.find("result");
  auto error = j.find("error");
  if (method != j.end()) {
    if (!method->is_string() || result != j.end() || error != j.end()) {
      throw Error(ErrorCode::kFrameError, "malformed request envelope");
    }
    RpcRequest r;
    r.id = id->get<std::int64_t>();
    r.method = method->get<std::string>();
    if (auto p = j.find("params"); p != j.end()) r.params = *p;
    return r;
  }

  if ((result != j.end()) == (error != j.end())) {
    throw Error(ErrorCode::kFrameError, "response must carry exactly one of result/error");
  }
  RpcResponse r;
  r.id = id->get<std::int64_t>();
  if (result != j.end()) {
    r.result = *result;
  } else {
    if (!error->is_object() || !error->contains("code") || !(*error)["code"].is_number_integer() ||
        !error->contains("message") || !(*error)["message"].is_string()) {
      throw Error(ErrorCode::kFrameError, "malformed error object");
    }
    RpcError e;
    e.code = (*error)["code"].get<int>();
    e.message = (*error)["message"].get<std::string>();
    if (auto d = error->find("data"); d != error->end()) e.data = *d;
    r.error = std::move(e);
  }
  return r;
}

}  // namespace

Json ToolDescriptor::to_json() const {
  return {{"name", name},
          {"description", description},
          {"inputSchema", param_schema},
          {"outputSchema", result_schema},
          {"reentrant", reentrant}};
}

ToolDescriptor ToolDescriptor::from_json(const Json& j) {
  ToolDescriptor d;
  d.name = require_string(j, "name", "tool");
  d.description = optional_string(j, "description", "tool").value_or("");
  if (auto it = j.find("inputSchema"); it != j.end()) d.param_schema = *it;
  if (auto it = j.find("outputSchema"); it != j.end()) d.result_schema = *it;
  if (auto it = j.find("reentrant"); it != j.end() && it->is_boolean()) d.reentrant = it->get<bool>();
  return d;
}

ToolResult ToolResult::success(std::int64_t id, Json payload, std::int64_t duration_ms) {
  ToolResult r;
  r.id = id;
  r.ok = true;
  r.payload = std::move(payload);
  r.duration_ms = duration_ms;
  return r;
}

ToolResult ToolResult::failure(std::int64_t id, ErrorCode code, std::string message,
                               std::string reason, std::int64_t duration_ms) {
  ToolResult r;
  r.id = id;
  r.ok = false;
  r.error = {code, std::move(message), std::move(reason)};
  r.duration_ms = duration_ms;
  return r;
}

int rpc_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFrameError:
    case ErrorCode::kParseError:
      return -32700;
    case ErrorCode::kToolNotFound:
      return -32601;
    case ErrorCode::kInvalidParams:
      return -32602;
    case ErrorCode::kTimeout:
      return -32001;
    case ErrorCode::kConnectionError:
      return -32002;
    default:
      return -32000;
  }
}

Json message_to_json(const Message& m) {
  Json j = {{"jsonrpc", "2.0"}};
  if (const auto* req = std::get_if<RpcRequest>(&m)) {
    j["id"] = req->id;
    j["method"] = req->method;
    if (!req->params.is_null()) j["params"] = req->params;
    return j;
  }
  const auto& resp = std::get<RpcResponse>(m);
  j["id"] = resp.id;
  if (resp.error) {
    Json e = {{"code", resp.error->code}, {"message", resp.error->message}};
    if (!resp.error->data.is_null()) e["data"] = resp.error->data;
    j["error"] = std::move(e);
  } else {
    j["result"] = resp.result.value_or(Json());
  }
  return j;
}

Message message_from_json(const Json& j) { return envelope_from_json(j); }

RpcRequest to_rpc(const ToolRequest& r) {
  return {r.id, std::string(kMethodCall), Json{{"name", r.tool_name}, {"arguments", r.arguments}}};
}

ToolRequest tool_request_from_rpc(const RpcRequest& r) {
  if (r.method != kMethodCall) {
    throw Error(ErrorCode::kInvalidParams, "not a tools/call request: " + r.method);
  }
  if (!r.params.is_object() || !r.params.contains("name") || !r.params["name"].is_string()) {
    throw Error(ErrorCode::kInvalidParams, "tools/call requires params.name");
  }
  ToolRequest t;
  t.id = r.id;
  t.tool_name = r.params["name"].get<std::string>();
  if (auto a = r.params.find("arguments"); a != r.params.end() && !a->is_null()) {
    t.arguments = *a;
  }
  return t;
}

RpcResponse to_rpc(const ToolResult& r) {
  RpcResponse out;
  out.id = r.id;
  if (r.ok) {
    out.result = Json{{"content", r.payload}, {"meta", {{"duration_ms", r.duration_ms}}}};
    return out;
  }
  Json data = {{"kind", std::string(to_string(r.error.code))}};
  if (!r.error.reason.empty()) data["reason"] = r.error.reason;
  data["duration_ms"] = r.duration_ms;
  out.error = RpcError{rpc_code_for(r.error.code), r.error.message, std::move(data)};
  return out;
}

ToolResult tool_result_from_rpc(const RpcResponse& r) {
  if (r.result) {
    const Json& res = *r.result;
    Json payload = res.is_object() && res.contains("content") ? res["content"] : res;
    std::int64_t duration = 0;
    if (res.is_object() && res.contains("meta") && res["meta"].contains("duration_ms")) {
      duration = res["meta"]["duration_ms"].get<std::int64_t>();
    }
    return ToolResult::success(r.id, std::move(payload), duration);
  }
  const RpcError& e = r.error.value();
  ErrorCode code = ErrorCode::kToolError;
  std::string reason;
  std::int64_t duration = 0;
  if (e.data.is_object()) {
    if (auto k = e.data.find("kind"); k != e.data.end() && k->is_string()) {
      code = error_code_from_string(k->get<std::string>());
    }
    if (auto rs = e.data.find("reason"); rs != e.data.end() && rs->is_string()) {
      reason = rs->get<std::string>();
    }
    if (auto d = e.data.find("duration_ms"); d != e.data.end() && d->is_number_integer()) {
      duration = d->get<std::int64_t>();
    }
  } else if (e.code == -32601) {
    code = ErrorCode::kToolNotFound;
  } else if (e.code == -32602) {
    code = ErrorCode::kInvalidParams;
  }
  return ToolResult::failure(r.id, code, e.message, std::move(reason), duration);
}

std::string_view to_string(Framing f) {
  return f == Framing::kNewline ? "newline" : "length-prefixed";
}

std::string encode_message(const Message& m, Framing framing) {
  const std::string body = dump_compact(message_to_json(m));
  if (framing == Framing::kNewline) return body + "\n";
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(body.size() + 4);
  out.push_back(static_cast<char>((n >> 24) & 0xFF));
  out.push_back(static_cast<char>((n >> 16) & 0xFF));
  out.push_back(static_cast<char>((n >> 8) & 0xFF));
  out.push_back(static_cast<char>(n & 0xFF));
  out += body;
  return out;
}

std::string encode_message(const ToolRequest& r, Framing framing) {
  return encode_message(Message{to_rpc(r)}, framing);
}

std::string encode_message(const ToolResult& r, Framing framing) {
  return encode_message(Message{to_rpc(r)}, framing);
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<Message> FrameDecoder::next() {
  for (;;) {
    std::string_view body;
    std::size_t frame_len = 0;
    std::size_t header = 0;
    if (framing_ == Framing::kNewline) {
      const std::size_t nl = buffer_.find('\n');
      if (nl == std::string::npos) {
        if (buffer_.size() > kMaxFrameBytes) {
          throw frame_error(consumed_, "frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes");
        }
        return std::nullopt;
      }
      frame_len = nl + 1;
      body = std::string_view(buffer_).substr(0, nl);
      if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
      if (body.find_first_not_of(" \t") == std::string_view::npos) {
        // blank keep-alive line
        buffer_.erase(0, frame_len);
        consumed_ += frame_len;
        continue;
      }
    } else {
      if (buffer_.size() < 4) return std::nullopt;
      const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
      const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
      if (n > kMaxFrameBytes) {
        throw frame_error(consumed_, "declared frame length " + std::to_string(n) + " exceeds limit");
      }
      header = 4;
      if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
      frame_len = 4 + n;
      body = std::string_view(buffer_).substr(4, n);
    }

    Message m;
    try {
      m = message_from_json(Json::parse(body.begin(), body.end()));
    } catch (const nlohmann::json::parse_error& e) {
      const std::size_t at = consumed_ + header + (e.byte == 0 ? 0 : e.byte - 1);
      throw frame_error(at, std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
      throw frame_error(consumed_, e.detail());
    }
    buffer_.erase(0, frame_len);
    consumed_ += frame_len;
    return m;
  }
}

void FrameDecoder::finish() const {
  if (buffer_.find_first_not_of(" \t\r\n") != std::string::npos &&
      (framing_ == Framing::kLengthPrefixed || !buffer_.empty())) {
    throw frame_error(consumed_, "truncated frame (" + std::to_string(buffer_.size()) +
                                     " trailing bytes)");
  }
  if (framing_ == Framing::kLengthPrefixed && !buffer_.empty()) {
    throw frame_error(consumed_, "truncated frame");
  }
}

std::vector<Message> decode_messages(std::string_view stream, Framing framing) {
  FrameDecoder decoder(framing);
  decoder.feed(stream);
  std::vector<Message> out;
  while (auto m = decoder.next()) out.push_back(std::move(*m));
  decoder.finish();
  return out;
}

Message decode_message(std::string_view frame, Framing framing) {
  auto all = decode_messages(frame, framing);
  if (all.size() != 1) {
    throw Error(ErrorCode::kFrameError,
                "expected exactly one frame, found " + std::to_string(all.size()));
  }
  return std::move(all.front());
}

}  // namespace paostruct::mcp
