// SPDX-License-Identifier: Apache-2.0
#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "codec.hpp"
#include "fkb/distribution.hpp"
#include "fkb/error.hpp"

namespace fkb::net {

namespace {

/// Reads of the caller's origin frame, relayed back over the inbound channel.
class CallbackProxy : public OriginProxy {
public:
  CallbackProxy(Channel& channel, std::string token, std::string frame)
      : channel_(channel), token_(std::move(token)), frame_(std::move(frame)) {}

  const std::string& frame() const override { return frame_; }

  Value read(const std::string& slot) override {
    auto r = codec::step_from(fetch(slot, false));
    if (r.outcome == Outcome::Suspended) throw Suspension{std::move(*r.question)};
    return r.outcome == Outcome::Resolved ? r.value : Value::unknown();
  }

  Value peek(const std::string& slot) override {
    try {
      auto r = codec::step_from(fetch(slot, true));
      return r.outcome == Outcome::Resolved ? r.value : Value::unknown();
    } catch (const Error&) {
      return Value::unknown();
    }
  }

private:
  Message fetch(const std::string& slot, bool peek) {
    Message m;
    m.kind = MsgKind::GetSlot;
    m.set("token", token_);
    m.set("slot", slot);
    m.set("origin", "caller");
    m.set("origin_frame", frame_);
    if (peek) m.set("probe", "peek");
    auto reply = channel_.call(std::move(m));
    if (reply.kind == MsgKind::Error) {
      auto e = error_from(reply);
      throw Error(Errc::RemoteError, "callback failed: " + std::string(e.what()), e.details());
    }
    return reply;
  }

  Channel& channel_;
  std::string token_;
  std::string frame_;
};

struct Connection {
  std::shared_ptr<Channel> channel;
  std::map<std::string, std::unique_ptr<Session>> sessions;  // by token
};

Value body_value(const Message& m) {
  if (m.body.empty()) throw Error(Errc::SchemaError, "message lacks a value", {"/message", "value"});
  return interchange::value_from_xml(m.body[0], "/message/" + m.body[0].name);
}

const std::string& need_field(const Message& m, std::string_view key) {
  const auto* v = m.field(key);
  if (!v || v->empty()) {
    throw Error(Errc::SchemaError, "message lacks '" + std::string(key) + "'", {"/message", std::string(key)});
  }
  return *v;
}

}  // namespace

KnowledgeServer::KnowledgeServer(ServerOptions options) : options_(std::move(options)) {}

KnowledgeServer::~KnowledgeServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void KnowledgeServer::bind() {
  if (listen_fd_ >= 0) return;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const auto where = options_.host + ":" + std::to_string(options_.port);
  if (int rc = ::getaddrinfo(options_.host.c_str(), std::to_string(options_.port).c_str(), &hints, &res); rc != 0) {
    throw Error(Errc::BindError, "cannot resolve " + options_.host + ": " + gai_strerror(rc), {where});
  }
  std::string last = "no address";
  for (auto* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
      last = std::strerror(errno);
      ::close(fd);
      continue;
    }
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                             : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    listen_fd_ = fd;
    break;
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) throw Error(Errc::BindError, "cannot listen on " + where + ": " + last, {where});
}

std::string KnowledgeServer::url(const std::string& frame) const {
  return "kb://" + options_.host + ":" + std::to_string(port_) + "/" + frame;
}

void KnowledgeServer::start(std::shared_ptr<SessionFactory> factory) {
  bind();
  factory_ = std::move(factory);
  stop_ = false;
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void KnowledgeServer::stop() {
  if (!running_) return;
  stop_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (auto& w : channels_) {
      if (auto ch = w.lock()) ch->shutdown();
    }
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  running_ = false;
}

void KnowledgeServer::accept_loop() {
  while (!stop_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    auto channel = std::make_shared<Channel>(Socket(fd), stats_, options_.timeout);
    std::lock_guard lock(mu_);
    std::erase_if(channels_, [](const auto& w) { return w.expired(); });
    channels_.push_back(channel);
    workers_.emplace_back([this, channel] { serve_connection(channel); });
  }
}

void KnowledgeServer::serve_connection(std::shared_ptr<Channel> channel) {
  Connection conn;
  conn.channel = channel;
  const auto& world = *factory_->world();

  auto hosted = [&](const std::string& frame) -> const FrameDef& {
    const auto* f = world.find(frame);
    if (!f || f->kind == FrameKind::RemoteStub) {
      throw Error(Errc::UnknownRemoteFrame, "frame '" + frame + "' is not hosted here", {frame});
    }
    return *f;
  };
  auto session_for = [&](const Message& m) -> Session& {
    const auto& token = need_field(m, "token");
    auto& s = conn.sessions[token];
    if (!s) s = factory_->create();
    return *s;
  };

  channel->set_handler([&](const Message& m) -> Message {
    switch (m.kind) {
      case MsgKind::Hello: {
        const auto& version = need_field(m, "version");
        if (version != std::to_string(kProtocolVersion)) {
          throw Error(Errc::VersionMismatch,
                      "protocol version " + version + " is not supported (server speaks " +
                          std::to_string(kProtocolVersion) + ")",
                      {version, std::to_string(kProtocolVersion)});
        }
        hosted(need_field(m, "frame"));
        Message reply;
        reply.kind = MsgKind::Hello;
        reply.set("version", std::to_string(kProtocolVersion));
        return reply;
      }
      case MsgKind::GetSlot: {
        const auto& frame = need_field(m, "frame");
        hosted(frame);
        auto& session = session_for(m);
        const auto probe = m.get("probe");
        const bool self = m.get("origin") == "self";
        if (self) {
          if (probe == "check") return codec::violations_to({});
          if (!probe.empty()) throw Error(Errc::ProtocolViolation, "probe '" + probe + "' needs a caller origin");
          return codec::step_to(session.serve_self(frame, need_field(m, "slot")));
        }
        CallbackProxy proxy(*channel, m.get("token"), need_field(m, "origin_frame"));
        if (probe == "specialize") {
          Message reply;
          reply.kind = MsgKind::SlotValue;
          reply.set("outcome", "probed");
          auto r = session.serve_specialize_probe(frame, proxy);
          reply.set("result", r == SpecializeProbe::Match ? "match" : r == SpecializeProbe::NoMatch ? "nomatch" : "open");
          return reply;
        }
        if (probe == "check") {
          return codec::violations_to(session.serve_check_probe(frame, need_field(m, "slot"), body_value(m), proxy));
        }
        if (!probe.empty()) throw Error(Errc::ProtocolViolation, "unknown probe '" + probe + "'");
        return codec::step_to(session.serve_slot(frame, need_field(m, "slot"), proxy));
      }
      case MsgKind::GetRules: {
        const auto& def = hosted(need_field(m, "frame"));
        Message reply;
        reply.kind = MsgKind::Rules;
        auto doc = interchange::rules_to_xml(def);
        stats_->rules_served(doc.children.size());
        reply.body.push_back(std::move(doc));
        return reply;
      }
      case MsgKind::Answer: {
        const auto& frame = need_field(m, "frame");
        hosted(frame);
        session_for(m).serve_answer(frame, need_field(m, "slot"), body_value(m));
        Message reply;
        reply.kind = MsgKind::Answer;
        reply.set("outcome", "stored");
        return reply;
      }
      default:
        throw Error(Errc::ProtocolViolation, "unexpected " + std::string(to_string(m.kind)) + " request");
    }
  });
  channel->serve(stop_);
  channel->shutdown();
}

// ---- instance -------------------------------------------------------------------

Instance::Instance(ServerOptions server, ClientOptions client)
    : server_(std::move(server)), client_(std::make_shared<RemoteClient>(client)) {
  server_.bind();
}

void Instance::start(std::shared_ptr<const FrameWorld> world, SessionOptions options,
                     const std::function<void(SessionFactory&)>& configure) {
  factory_ = std::make_shared<SessionFactory>(std::move(world), std::move(options));
  factory_->set_remote(client_->connector());
  if (configure) configure(*factory_);
  server_.start(factory_);
}

}  // namespace fkb::net
