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

// Tool protocol: descriptors, JSON-RPC shaped messages, stream framing, a
// tool server, and clients (in-process and over byte streams).
//
// Wire layout is documented in docs/protocol.md and pinned by the golden
// frames under tests/fixtures/frames.

#ifndef PAOSTRUCT_MCP_HPP_
#define PAOSTRUCT_MCP_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "paostruct/error.hpp"
#include "paostruct/json.hpp"

namespace paostruct::mcp {

inline constexpr std::string_view kMethodList = "tools/list";
inline constexpr std::string_view kMethodCall = "tools/call";
inline constexpr std::chrono::milliseconds kDefaultCallTimeout{300'000};

struct ToolDescriptor {
  std::string name;
  std::string description;
  Json param_schema = Json::object();   // JSON-Schema subset, see validate_against_schema
  Json result_schema = Json::object();
  bool reentrant = true;                // false: the server serializes calls

  Json to_json() const;
  static ToolDescriptor from_json(const Json& j);
  bool operator==(const ToolDescriptor&) const = default;
};

struct ToolRequest {
  std::int64_t id = 0;
  std::string tool_name;
  Json arguments = Json::object();

  bool operator==(const ToolRequest&) const = default;
};

struct ToolError {
  ErrorCode code = ErrorCode::kToolError;
  std::string message;
  std::string reason;  // finer cause for TOOL_ERROR, e.g. "INVALID_CATEGORY"

  bool operator==(const ToolError&) const = default;
};

// Exactly one of payload / error is meaningful, selected by `ok`.
struct ToolResult {
  std::int64_t id = 0;
  bool ok = false;
  Json payload;
  ToolError error;
  std::int64_t duration_ms = 0;

  static ToolResult success(std::int64_t id, Json payload, std::int64_t duration_ms = 0);
  static ToolResult failure(std::int64_t id, ErrorCode code, std::string message,
                            std::string reason = {}, std::int64_t duration_ms = 0);

  bool operator==(const ToolResult&) const = default;
};

// JSON-RPC 2.0 envelopes.
struct RpcError {
  int code = 0;
  std::string message;
  Json data;

  bool operator==(const RpcError&) const = default;
};

struct RpcRequest {
  std::int64_t id = 0;
  std::string method;
  Json params;  // null when absent

  bool operator==(const RpcRequest&) const = default;
};

struct RpcResponse {
  std::int64_t id = 0;
  std::optional<Json> result;
  std::optional<RpcError> error;

  bool operator==(const RpcResponse&) const = default;
};

using Message = std::variant<RpcRequest, RpcResponse>;

Json message_to_json(const Message& m);
// Throws Error(kFrameError) for envelopes that are valid JSON but not a
// well-formed request or response.
Message message_from_json(const Json& j);

RpcRequest to_rpc(const ToolRequest& r);
ToolRequest tool_request_from_rpc(const RpcRequest& r);
RpcResponse to_rpc(const ToolResult& r);
ToolResult tool_result_from_rpc(const RpcResponse& r);

int rpc_code_for(ErrorCode code);

enum class Framing {
  kNewline,         // one compact JSON document per line (stdio)
  kLengthPrefixed,  // 4-byte big-endian length then the JSON bytes (tcp)
};

std::string_view to_string(Framing f);

std::string encode_message(const Message& m, Framing framing);
std::string encode_message(const ToolRequest& r, Framing framing);
std::string encode_message(const ToolResult& r, Framing framing);

// Incremental decoder over a byte stream. Errors carry the absolute byte
// offset of the offending frame as Error(kFrameError).
class FrameDecoder {
 public:
  static constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

  explicit FrameDecoder(Framing framing) : framing_(framing) {}

  void feed(std::string_view bytes);
  // Next complete message, or nullopt when more bytes are needed.
  std::optional<Message> next();
  // Call at end of stream; throws if a partial frame is left over.
  void finish() const;

  std::size_t consumed() const { return consumed_; }

 private:
  Framing framing_;
  std::string buffer_;
  std::size_t consumed_ = 0;  // absolute offset of buffer_[0]
};

// Decodes a complete stream; throws Error(kFrameError) on malformed or
// truncated input.
std::vector<Message> decode_messages(std::string_view stream, Framing framing);
Message decode_message(std::string_view frame, Framing framing);

// ---------------------------------------------------------------------------
// Server

using ToolHandler = std::function<Json(const Json& arguments)>;

class ToolServer {
 public:
  ToolServer() = default;
  ToolServer(const ToolServer&) = delete;
  ToolServer& operator=(const ToolServer&) = delete;

  // Throws Error(kConfigError) on a duplicate name or a required parameter
  // missing from the parameter schema's properties.
  void register_tool(ToolDescriptor descriptor, ToolHandler handler);

  // Registration order.
  std::vector<ToolDescriptor> list_tools() const;

  // Validates arguments against the descriptor before the handler runs.
  // Never throws: every failure is a ToolResult error.
  ToolResult call_tool(std::int64_t id, const std::string& name, const Json& arguments) const;

  RpcResponse handle(const RpcRequest& request) const;

 private:
  struct Entry {
    ToolDescriptor descriptor;
    ToolHandler handler;
    std::unique_ptr<std::mutex> serial;  // set for non-reentrant tools
  };
  const Entry* find(const std::string& name) const;

  std::vector<Entry> tools_;
};

// Serves newline or length-prefixed frames read from in_fd, writing
// responses to out_fd. Requests are handled concurrently; returns once the
// input reaches end of stream and all in-flight requests are answered.
void serve_fds(const ToolServer& server, int in_fd, int out_fd, Framing framing);

// Length-prefixed frames over TCP on the loopback interface.
class TcpServer {
 public:
  // port 0 picks an ephemeral port; see port().
  TcpServer(const ToolServer& server, std::uint16_t port, std::string host = "127.0.0.1");
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  // Blocks accepting connections until stop().
  void run();
  // Runs the accept loop on a background thread.
  void start();
  void stop();

 private:
  const ToolServer& server_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex conn_mu_;
  std::vector<std::thread> connections_;
  std::vector<int> connection_fds_;
};

// ---------------------------------------------------------------------------
// Clients

class ToolClient {
 public:
  virtual ~ToolClient() = default;
  // Throws Error(kConnectionError) on transport failure.
  virtual std::vector<ToolDescriptor> list_tools() = 0;
  // Never throws for tool-level failures; transport failures and timeouts
  // come back as CONNECTION_ERROR / TIMEOUT results.
  virtual ToolResult call_tool(const std::string& name, const Json& arguments) = 0;
};

// Direct dispatch into a server in the same process; no serialization.
class InProcessClient : public ToolClient {
 public:
  explicit InProcessClient(std::shared_ptr<const ToolServer> server) : server_(std::move(server)) {}
  std::vector<ToolDescriptor> list_tools() override { return server_->list_tools(); }
  ToolResult call_tool(const std::string& name, const Json& arguments) override;

 private:
  std::shared_ptr<const ToolServer> server_;
  std::atomic<std::int64_t> next_id_{1};
};

// Bidirectional byte channel, usually a pair of file descriptors.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  // Returns 0 at end of stream; throws Error(kConnectionError) on failure.
  virtual std::size_t read(char* buf, std::size_t cap) = 0;
  virtual void write(std::string_view bytes) = 0;
  // Unblocks a pending read().
  virtual void shutdown() = 0;
};

class FdStream : public ByteStream {
 public:
  // Takes ownership of both descriptors (they may be equal, e.g. a socket).
  FdStream(int read_fd, int write_fd, bool is_socket = false);
  ~FdStream() override;
  std::size_t read(char* buf, std::size_t cap) override;
  void write(std::string_view bytes) override;
  void shutdown() override;

 private:
  int read_fd_;
  int write_fd_;
  bool is_socket_;
};

std::unique_ptr<ByteStream> connect_tcp(const std::string& host, std::uint16_t port);

// Client over any ByteStream. Supports many in-flight calls; responses are
// matched to callers by id.
class StreamClient : public ToolClient {
 public:
  StreamClient(std::unique_ptr<ByteStream> stream, Framing framing,
               std::chrono::milliseconds timeout = kDefaultCallTimeout);
  ~StreamClient() override;

  std::vector<ToolDescriptor> list_tools() override;
  ToolResult call_tool(const std::string& name, const Json& arguments) override;

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

 private:
  // Sends a request and waits for its response. nullopt on timeout; throws
  // Error(kConnectionError) if the stream is gone.
  std::optional<RpcResponse> round_trip(RpcRequest request);
  void reader_loop();

  std::unique_ptr<ByteStream> stream_;
  Framing framing_;
  std::chrono::milliseconds timeout_;
  std::atomic<std::int64_t> next_id_{1};
  std::mutex mu_;  // guards pending_, broken_, writes
  std::map<std::int64_t, std::promise<RpcResponse>> pending_;
  bool broken_ = false;
  std::string broken_reason_;
  std::thread reader_;
};

// Launches `argv` with stdin/stdout piped and talks newline frames to it.
// The child is terminated and reaped on destruction.
class SubprocessClient : public ToolClient {
 public:
  SubprocessClient(const std::vector<std::string>& argv,
                   std::chrono::milliseconds timeout = kDefaultCallTimeout);
  ~SubprocessClient() override;
  std::vector<ToolDescriptor> list_tools() override { return client_->list_tools(); }
  ToolResult call_tool(const std::string& name, const Json& arguments) override {
    return client_->call_tool(name, arguments);
  }

 private:
  int pid_ = -1;
  std::unique_ptr<StreamClient> client_;
};

// Routes individual tools to other clients (e.g. a tool hosted by an
// external server); everything else goes to the default client.
class RoutingClient : public ToolClient {
 public:
  explicit RoutingClient(std::shared_ptr<ToolClient> fallback) : fallback_(std::move(fallback)) {}
  void route(const std::string& tool, std::shared_ptr<ToolClient> client);
  std::vector<ToolDescriptor> list_tools() override;
  ToolResult call_tool(const std::string& name, const Json& arguments) override;

 private:
  std::shared_ptr<ToolClient> fallback_;
  std::map<std::string, std::shared_ptr<ToolClient>> routes_;
};

}  // namespace paostruct::mcp

#endif  // PAOSTRUCT_MCP_HPP_
