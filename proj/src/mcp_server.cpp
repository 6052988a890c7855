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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <list>

#include "paostruct/io.hpp"
#include "paostruct/mcp.hpp"

namespace paostruct::mcp {

namespace {

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               since)
      .count();
}

// Reads frames from in_fd until EOF, answering each request on its own
// task. Responses share one writer guarded by a mutex.
void serve_loop(const ToolServer& server, int in_fd, int out_fd, Framing framing) {
  FrameDecoder decoder(framing);
  std::mutex write_mu;
  std::list<std::future<void>> inflight;

  auto respond = [&](const RpcResponse& response) {
    const std::string frame = encode_message(Message{response}, framing);
    std::lock_guard lock(write_mu);
    try {
      io::write_all(out_fd, frame);
    } catch (const Error&) {
      // peer went away; nothing left to report to
    }
  };

  char buf[16384];
  for (;;) {
    const ssize_t n = ::read(in_fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    try {
      while (auto m = decoder.next()) {
        if (auto* req = std::get_if<RpcRequest>(&*m)) {
          inflight.push_back(std::async(std::launch::async, [&server, &respond, r = std::move(*req)] {
            respond(server.handle(r));
          }));
        }
      }
    } catch (const Error& e) {
      // The stream cannot be resynchronized after a framing error.
      RpcResponse resp;
      resp.id = 0;
      resp.error = RpcError{rpc_code_for(ErrorCode::kFrameError), e.detail(),
                            Json{{"kind", "FRAME_ERROR"}}};
      respond(resp);
      break;
    }
    inflight.remove_if([](std::future<void>& f) {
      return f.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
    });
  }
  for (auto& f : inflight) f.wait();
}

}  // namespace

void ToolServer::register_tool(ToolDescriptor descriptor, ToolHandler handler) {
  if (find(descriptor.name) != nullptr) {
    throw Error(ErrorCode::kConfigError, "tool '" + descriptor.name + "' already registered");
  }
  if (auto req = descriptor.param_schema.find("required"); req != descriptor.param_schema.end()) {
    const Json props = descriptor.param_schema.value("properties", Json::object());
    for (const auto& name : *req) {
      if (!props.contains(name.get<std::string>())) {
        throw Error(ErrorCode::kConfigError, "tool '" + descriptor.name + "': required param '" +
                                                 name.get<std::string>() + "' has no schema");
      }
    }
  }
  Entry e;
  e.serial = descriptor.reentrant ? nullptr : std::make_unique<std::mutex>();
  e.descriptor = std::move(descriptor);
  e.handler = std::move(handler);
  tools_.push_back(std::move(e));
}

std::vector<ToolDescriptor> ToolServer::list_tools() const {
  std::vector<ToolDescriptor> out;
  out.reserve(tools_.size());
  for (const auto& e : tools_) out.push_back(e.descriptor);
  return out;
}

const ToolServer::Entry* ToolServer::find(const std::string& name) const {
  for (const auto& e : tools_) {
    if (e.descriptor.name == name) return &e;
  }
  return nullptr;
}

ToolResult ToolServer::call_tool(std::int64_t id, const std::string& name,
                                 const Json& arguments) const {
  const auto start = std::chrono::steady_clock::now();
  const Entry* entry = find(name);
  if (entry == nullptr) {
    return ToolResult::failure(id, ErrorCode::kToolNotFound, "unknown tool '" + name + "'", {},
                               elapsed_ms(start));
  }
  const Json args = arguments.is_null() ? Json::object() : arguments;
  Json schema = entry->descriptor.param_schema;
  if (!schema.contains("type")) schema["type"] = "object";
  if (auto err = validate_against_schema(args, schema, "arguments")) {
    return ToolResult::failure(id, ErrorCode::kInvalidParams, *err, {}, elapsed_ms(start));
  }

  try {
    std::unique_lock<std::mutex> lock;
    if (entry->serial) lock = std::unique_lock(*entry->serial);
    Json payload = entry->handler(args);
    return ToolResult::success(id, std::move(payload), elapsed_ms(start));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidParams) {
      return ToolResult::failure(id, ErrorCode::kInvalidParams, e.detail(), {}, elapsed_ms(start));
    }
    const std::string reason = e.code() == ErrorCode::kToolError ? "" : std::string(to_string(e.code()));
    return ToolResult::failure(id, ErrorCode::kToolError, e.detail(), reason, elapsed_ms(start));
  } catch (const std::exception& e) {
    return ToolResult::failure(id, ErrorCode::kToolError, e.what(), {}, elapsed_ms(start));
  }
}

RpcResponse ToolServer::handle(const RpcRequest& request) const {
  if (request.method == kMethodList) {
    Json tools = Json::array();
    for (const auto& d : list_tools()) tools.push_back(d.to_json());
    RpcResponse r;
    r.id = request.id;
    r.result = Json{{"tools", std::move(tools)}};
    return r;
  }
  if (request.method == kMethodCall) {
    ToolRequest call;
    try {
      call = tool_request_from_rpc(request);
    } catch (const Error& e) {
      return to_rpc(ToolResult::failure(request.id, ErrorCode::kInvalidParams, e.detail()));
    }
    return to_rpc(call_tool(call.id, call.tool_name, call.arguments));
  }
  RpcResponse r;
  r.id = request.id;
  r.error = RpcError{-32601, "unknown method '" + request.method + "'",
                     Json{{"kind", "TOOL_NOT_FOUND"}}};
  return r;
}

void serve_fds(const ToolServer& server, int in_fd, int out_fd, Framing framing) {
  serve_loop(server, in_fd, out_fd, framing);
}

TcpServer::TcpServer(const ToolServer& server, std::uint16_t port, std::string host)
    : server_(server) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) {
    throw Error(ErrorCode::kConnectionError, std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error(ErrorCode::kConfigError, "invalid listen address '" + host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string reason = std::strerror(errno);
    ::close(listen_fd_);
    throw Error(ErrorCode::kConnectionError, "bind/listen on port " + std::to_string(port) + ": " + reason);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::run() {
  while (!stopping_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listen socket closed by stop()
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(conn_mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    connection_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { serve_loop(server_, fd, fd, Framing::kLengthPrefixed); });
  }
}

void TcpServer::start() {
  accept_thread_ = std::thread([this] { run(); });
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> conns;
  {
    std::lock_guard lock(conn_mu_);
    for (int fd : connection_fds_) ::shutdown(fd, SHUT_RDWR);
    conns.swap(connections_);
  }
  for (auto& t : conns) t.join();
  for (int fd : connection_fds_) ::close(fd);
  connection_fds_.clear();
}

}  // namespace paostruct::mcp
