// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fkb/error.hpp"
#include "fkb/interchange.hpp"
#include "fkb/session.hpp"

namespace fkb::net {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxMessageBytes = 16u << 20;

// ---- framing ---------------------------------------------------------------

/// 4-byte big-endian length followed by the payload.
std::string encode_frame(std::string_view payload);

/// Incremental decoder; independent of how the stream is chunked.
class FrameDecoder {
public:
  explicit FrameDecoder(std::size_t max_bytes = kMaxMessageBytes) : max_(max_bytes) {}
  void feed(std::string_view bytes);
  /// Next complete payload. Throws ProtocolViolation on an oversized frame.
  std::optional<std::string> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

private:
  std::size_t max_;
  std::string buffer_;
  std::size_t offset_ = 0;
};

// ---- messages ----------------------------------------------------------------

enum class MsgKind { Hello, GetSlot, SlotValue, GetRules, Rules, Question, Answer, Error, Bye };

std::string_view to_string(MsgKind kind);
std::optional<MsgKind> msg_kind_from_string(std::string_view name);

/// One wire message. Requests carry a fresh `id`; replies echo the request
/// id in `re`.
struct Message {
  MsgKind kind = MsgKind::Hello;
  std::uint64_t id = 0;
  std::uint64_t re = 0;
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<xml::Element> body;

  const std::string* field(std::string_view key) const;
  std::string get(std::string_view key) const;  // empty when absent
  Message& set(std::string key, std::string value);
  bool is_reply() const { return re != 0; }
};

std::string encode_message(const Message& m);
/// Throws SchemaError on anything that is not a well-formed message.
Message decode_message(std::string_view payload);

Message error_reply(const Error& e);
/// Error carried by an error reply.
Error error_from(const Message& reply);

// ---- accounting ----------------------------------------------------------------

struct MessageStats {
  std::map<std::string, std::uint64_t> in;
  std::map<std::string, std::uint64_t> out;
  std::uint64_t errors = 0;
  std::uint64_t rules_served = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;

  std::uint64_t in_count(MsgKind k) const;
  std::uint64_t out_count(MsgKind k) const;
  std::uint64_t total() const;
  void merge(const MessageStats& other);
  friend bool operator==(const MessageStats&, const MessageStats&) = default;
};

/// Thread-safe accumulator shared by the connections of a client or server.
class StatsSink {
public:
  void in(MsgKind k);
  void out(MsgKind k);
  void error();
  void rules_served(std::uint64_t n);
  void cache(std::uint64_t hits, std::uint64_t misses);
  MessageStats snapshot() const;

private:
  mutable std::mutex mu_;
  MessageStats stats_;
};

// ---- transport ------------------------------------------------------------------

struct RemoteUrl {
  std::string host;
  std::uint16_t port = 0;
  std::string frame;

  /// `kb://host:port/Frame`; throws ConnectError when malformed.
  static RemoteUrl parse(std::string_view url);
  std::string endpoint() const { return host + ":" + std::to_string(port); }
  std::string str() const { return "kb://" + endpoint() + "/" + frame; }
};

class Socket {
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;

  /// Throws ConnectError.
  static Socket connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);
  void send_all(std::string_view bytes);
  /// Bytes read; empty on orderly close. Throws Timeout.
  std::string receive(std::chrono::milliseconds timeout);
  void shutdown();
  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

private:
  int fd_ = -1;
};

/// Message channel over one socket. Full duplex: while a call waits for its
/// reply, inbound requests are dispatched to the handler (which may itself
/// issue nested calls on this channel).
class Channel {
public:
  using Handler = std::function<Message(const Message& request)>;

  Channel(Socket socket, std::shared_ptr<StatsSink> stats, std::chrono::milliseconds timeout);

  void set_handler(Handler h) { handler_ = std::move(h); }
  /// Sends `request` and waits for the matching reply. Throws Timeout,
  /// ConnectError (peer gone), ProtocolViolation (unexpected reply id).
  Message call(Message request);
  /// Fire-and-forget request.
  void notify(Message request);
  /// Serves inbound requests until the peer closes or `stop` is set.
  void serve(const std::atomic<bool>& stop);
  void shutdown() { socket_.shutdown(); }

private:
  std::optional<Message> read_message(std::chrono::milliseconds timeout);
  void send(Message& m);
  void dispatch(const Message& request);

  Socket socket_;
  FrameDecoder decoder_;
  std::shared_ptr<StatsSink> stats_;
  std::chrono::milliseconds timeout_;
  Handler handler_;
  std::uint64_t next_id_ = 1;
  bool closed_ = false;
};

// ---- client ----------------------------------------------------------------------

struct ClientOptions {
  std::chrono::milliseconds timeout{30000};
  int protocol_version = kProtocolVersion;
};

/// Direct handle to a remote frame (hello done).
class RemoteHandle {
public:
  const RemoteUrl& url() const { return url_; }
  MessageStats stats() const { return stats_->snapshot(); }
  Channel& channel() { return *channel_; }

private:
  friend std::unique_ptr<RemoteHandle> open_handle(const RemoteUrl& url, const ClientOptions& options,
                                                   const std::shared_ptr<StatsSink>& stats);
  RemoteUrl url_;
  std::shared_ptr<StatsSink> stats_;
  std::unique_ptr<Channel> channel_;
};

/// Opens a channel to the instance named by `url` and performs the hello
/// exchange. Throws ConnectError, VersionMismatch, UnknownRemoteFrame.
std::unique_ptr<RemoteHandle> connect(const std::string& url, const ClientOptions& options = {},
                                      std::shared_ptr<StatsSink> stats = nullptr);

/// Produces remote backends for sessions; counts all their traffic.
class RemoteClient : public std::enable_shared_from_this<RemoteClient> {
public:
  explicit RemoteClient(ClientOptions options = {}) : options_(options), stats_(std::make_shared<StatsSink>()) {}

  RemoteConnector connector();
  MessageStats stats() const { return stats_->snapshot(); }
  const ClientOptions& options() const { return options_; }
  const std::shared_ptr<StatsSink>& sink() const { return stats_; }

private:
  ClientOptions options_;
  std::shared_ptr<StatsSink> stats_;
};

/// RemoteBackend speaking the wire protocol: one channel per peer endpoint,
/// one token per session.
class ClientBackend : public RemoteBackend {
public:
  ClientBackend(Session& session, ClientOptions options, std::shared_ptr<StatsSink> stats);
  ~ClientBackend() override;

  StepResult get_slot(const FrameDef& stub, const std::string& slot, const std::string& origin) override;
  SpecializeProbe specialize_probe(const FrameDef& candidate, const std::string& origin) override;
  std::vector<std::string> check_probe(const FrameDef& stub, const std::string& origin, const std::string& slot,
                                       const Value& candidate) override;
  xml::Element get_rules(const std::string& url, const std::string& frame) override;
  void answer(const FrameDef& stub, const std::string& frame, const std::string& slot, const Value& value) override;

  /// Opens (and greets) the peer for `url` ahead of use.
  void prepare(const std::string& url);
  /// Token naming this session at every peer.
  const std::string& token() const { return token_; }

private:
  Channel& channel_for(const RemoteUrl& url);
  Message handle(const Message& request);
  Message request(MsgKind kind, const FrameDef& stub, const std::string& slot, const std::string& origin);

  Session& session_;
  ClientOptions options_;
  std::shared_ptr<StatsSink> stats_;
  std::map<std::string, std::unique_ptr<RemoteHandle>> peers_;  // by endpoint
  std::string token_;
  std::set<std::string> origins_;  // frames sent as origin; callbacks may only name these
};

std::string random_token();

// ---- server -----------------------------------------------------------------------

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  std::chrono::milliseconds timeout{30000};
};

/// Knowledge server for one frozen world. Two-phase so that a cluster can
/// learn every port before its worlds are built: bind(), then start().
class KnowledgeServer {
public:
  explicit KnowledgeServer(ServerOptions options = {});
  ~KnowledgeServer();
  KnowledgeServer(const KnowledgeServer&) = delete;
  KnowledgeServer& operator=(const KnowledgeServer&) = delete;

  /// Throws BindError.
  void bind();
  std::uint16_t port() const { return port_; }
  const std::string& host() const { return options_.host; }
  std::string url(const std::string& frame) const;

  /// Serves sessions created from `factory` (which must outlive the server).
  void start(std::shared_ptr<SessionFactory> factory);
  void stop();
  bool running() const { return running_; }

  MessageStats stats() const { return stats_->snapshot(); }

private:
  void accept_loop();
  void serve_connection(std::shared_ptr<Channel> channel);

  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::shared_ptr<SessionFactory> factory_;
  std::shared_ptr<StatsSink> stats_ = std::make_shared<StatsSink>();
  std::atomic<bool> stop_{false};
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<std::weak_ptr<Channel>> channels_;
};

// ---- instances and partitions ------------------------------------------------------

/// A served world plus the client side its sessions use for stubs.
class Instance {
public:
  explicit Instance(ServerOptions server = {}, ClientOptions client = {});

  /// Port is known after construction; the world comes later.
  std::uint16_t port() const { return server_.port(); }
  std::string url(const std::string& frame) const { return server_.url(frame); }
  /// `configure` runs on the factory before the server accepts anything.
  void start(std::shared_ptr<const FrameWorld> world, SessionOptions options = {},
             const std::function<void(SessionFactory&)>& configure = {});
  void stop() { server_.stop(); }

  SessionFactory& factory() { return *factory_; }
  KnowledgeServer& server() { return server_; }
  RemoteClient& client() { return *client_; }

private:
  KnowledgeServer server_;
  std::shared_ptr<RemoteClient> client_;
  std::shared_ptr<SessionFactory> factory_;
};

/// Splits a world across nodes: node k keeps the frames assigned to it and
/// sees every other frame as a stub `remote frame X : P at <url of X>`.
/// `assignment` maps frame name to node index; `endpoints` are host:port.
std::vector<WorldBuild> partition_world(const WorldBuild& world, const std::map<std::string, std::size_t>& assignment,
                                        const std::vector<std::string>& endpoints);

}  // namespace fkb::net
