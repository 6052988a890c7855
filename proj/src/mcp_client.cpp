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

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "paostruct/io.hpp"
#include "paostruct/mcp.hpp"

namespace paostruct::mcp {

ToolResult InProcessClient::call_tool(const std::string& name, const Json& arguments) {
  return server_->call_tool(next_id_++, name, arguments);
}

FdStream::FdStream(int read_fd, int write_fd, bool is_socket)
    : read_fd_(read_fd), write_fd_(write_fd), is_socket_(is_socket) {}

FdStream::~FdStream() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

std::size_t FdStream::read(char* buf, std::size_t cap) {
  for (;;) {
    const ssize_t n = ::read(read_fd_, buf, cap);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    throw Error(ErrorCode::kConnectionError, std::string("read failed: ") + std::strerror(errno));
  }
}

void FdStream::write(std::string_view bytes) {
  if (!is_socket_) {
    io::write_all(write_fd_, bytes);
    return;
  }
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(write_fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kConnectionError, std::string("write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void FdStream::shutdown() {
  if (is_socket_) {
    ::shutdown(read_fd_, SHUT_RDWR);
  } else if (write_fd_ >= 0) {
    // Closing our write end lets a pipe peer see EOF and exit, which in
    // turn ends our read.
    ::close(write_fd_);
    write_fd_ = -1;
  }
}

std::unique_ptr<ByteStream> connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::kConnectionError, "resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  std::string reason = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    reason = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw Error(ErrorCode::kConnectionError, "connect " + host + ":" + service + ": " + reason);
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdStream>(fd, fd, true);
}

StreamClient::StreamClient(std::unique_ptr<ByteStream> stream, Framing framing,
                           std::chrono::milliseconds timeout)
    : stream_(std::move(stream)), framing_(framing), timeout_(timeout) {
  reader_ = std::thread([this] { reader_loop(); });
}

StreamClient::~StreamClient() {
  stream_->shutdown();
  if (reader_.joinable()) reader_.join();
}

void StreamClient::reader_loop() {
  FrameDecoder decoder(framing_);
  char buf[16384];
  std::string reason = "connection closed by peer";
  try {
    for (;;) {
      const std::size_t n = stream_->read(buf, sizeof buf);
      if (n == 0) break;
      decoder.feed(std::string_view(buf, n));
      while (auto m = decoder.next()) {
        auto* resp = std::get_if<RpcResponse>(&*m);
        if (resp == nullptr) continue;  // servers never send requests here
        std::lock_guard lock(mu_);
        auto it = pending_.find(resp->id);
        if (it == pending_.end()) continue;  // caller already timed out
        it->second.set_value(std::move(*resp));
        pending_.erase(it);
      }
    }
  } catch (const Error& e) {
    reason = e.detail();
  }
  std::lock_guard lock(mu_);
  broken_ = true;
  broken_reason_ = reason;
  for (auto& [id, promise] : pending_) {
    promise.set_exception(std::make_exception_ptr(Error(ErrorCode::kConnectionError, reason)));
  }
  pending_.clear();
}

std::optional<RpcResponse> StreamClient::round_trip(RpcRequest request) {
  std::future<RpcResponse> future;
  const std::int64_t id = request.id;
  {
    std::lock_guard lock(mu_);
    if (broken_) throw Error(ErrorCode::kConnectionError, broken_reason_);
    future = pending_[id].get_future();
    try {
      stream_->write(encode_message(Message{std::move(request)}, framing_));
    } catch (const Error&) {
      pending_.erase(id);
      throw;
    }
  }
  if (future.wait_for(timeout_) != std::future_status::ready) {
    std::lock_guard lock(mu_);
    pending_.erase(id);
    return std::nullopt;
  }
  return future.get();
}

std::vector<ToolDescriptor> StreamClient::list_tools() {
  auto resp = round_trip(RpcRequest{next_id_++, std::string(kMethodList), Json()});
  if (!resp) throw Error(ErrorCode::kTimeout, "tools/list timed out");
  if (resp->error) throw Error(ErrorCode::kConnectionError, "tools/list failed: " + resp->error->message);
  std::vector<ToolDescriptor> out;
  const Json& result = resp->result.value();
  if (!result.contains("tools") || !result["tools"].is_array()) {
    throw Error(ErrorCode::kFrameError, "tools/list result lacks a tools array");
  }
  for (const auto& t : result["tools"]) out.push_back(ToolDescriptor::from_json(t));
  return out;
}

ToolResult StreamClient::call_tool(const std::string& name, const Json& arguments) {
  ToolRequest req{next_id_++, name, arguments};
  try {
    auto resp = round_trip(to_rpc(req));
    if (!resp) {
      return ToolResult::failure(req.id, ErrorCode::kTimeout,
                                 "no response within " + std::to_string(timeout_.count()) + " ms");
    }
    return tool_result_from_rpc(*resp);
  } catch (const Error& e) {
    return ToolResult::failure(req.id, ErrorCode::kConnectionError, e.detail());
  }
}

SubprocessClient::SubprocessClient(const std::vector<std::string>& argv,
                                   std::chrono::milliseconds timeout) {
  if (argv.empty()) throw Error(ErrorCode::kConfigError, "empty server command");
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::kConnectionError, std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) throw Error(ErrorCode::kConnectionError, std::string("fork: ") + std::strerror(errno));
  if (pid_ == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  client_ = std::make_unique<StreamClient>(std::make_unique<FdStream>(from_child[0], to_child[1]),
                                           Framing::kNewline, timeout);
}

SubprocessClient::~SubprocessClient() {
  client_.reset();  // closes the child's stdin; a well-behaved server exits
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(20'000);
    }
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
  }
}

void RoutingClient::route(const std::string& tool, std::shared_ptr<ToolClient> client) {
  routes_[tool] = std::move(client);
}

std::vector<ToolDescriptor> RoutingClient::list_tools() {
  std::vector<ToolDescriptor> out = fallback_->list_tools();
  for (const auto& [tool, client] : routes_) {
    for (const auto& d : client->list_tools()) {
      if (d.name != tool) continue;
      bool replaced = false;
      for (auto& existing : out) {
        if (existing.name == tool) {
          existing = d;
          replaced = true;
        }
      }
      if (!replaced) out.push_back(d);
    }
  }
  return out;
}

ToolResult RoutingClient::call_tool(const std::string& name, const Json& arguments) {
  if (auto it = routes_.find(name); it != routes_.end()) return it->second->call_tool(name, arguments);
  return fallback_->call_tool(name, arguments);
}

}  // namespace paostruct::mcp
