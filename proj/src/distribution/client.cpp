// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "codec.hpp"
#include "fkb/distribution.hpp"
#include "fkb/error.hpp"

namespace fkb::net {

std::string random_token() {
  static thread_local std::random_device rd;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 4; ++i) {
    auto word = rd();
    for (int j = 0; j < 8; ++j) {
      out.push_back(kHex[word & 0xf]);
      word >>= 4;
    }
  }
  return out;
}

std::unique_ptr<RemoteHandle> open_handle(const RemoteUrl& url, const ClientOptions& options,
                                          const std::shared_ptr<StatsSink>& stats) {
  auto h = std::unique_ptr<RemoteHandle>(new RemoteHandle);
  h->url_ = url;
  h->stats_ = stats;
  auto socket = Socket::connect(url.host, url.port, options.timeout);
  h->channel_ = std::make_unique<Channel>(std::move(socket), stats, options.timeout);
  Message hello;
  hello.kind = MsgKind::Hello;
  hello.set("version", std::to_string(options.protocol_version));
  hello.set("frame", url.frame);
  auto reply = h->channel_->call(std::move(hello));
  if (reply.kind == MsgKind::Error) throw error_from(reply);
  if (reply.kind != MsgKind::Hello) {
    throw Error(Errc::ProtocolViolation, "expected hello, got " + std::string(to_string(reply.kind)));
  }
  return h;
}

std::unique_ptr<RemoteHandle> connect(const std::string& url, const ClientOptions& options,
                                      std::shared_ptr<StatsSink> stats) {
  if (!stats) stats = std::make_shared<StatsSink>();
  return open_handle(RemoteUrl::parse(url), options, stats);
}

RemoteConnector RemoteClient::connector() {
  auto options = options_;
  auto stats = stats_;
  return [options, stats](Session& session) -> std::unique_ptr<RemoteBackend> {
    return std::make_unique<ClientBackend>(session, options, stats);
  };
}

// ---- backend -----------------------------------------------------------------

ClientBackend::ClientBackend(Session& session, ClientOptions options, std::shared_ptr<StatsSink> stats)
    : session_(session), options_(options), stats_(std::move(stats)), token_(random_token()) {
  if (!stats_) stats_ = std::make_shared<StatsSink>();
}

ClientBackend::~ClientBackend() {
  for (auto& [endpoint, peer] : peers_) {
    try {
      Message bye;
      bye.kind = MsgKind::Bye;
      peer->channel().notify(std::move(bye));
    } catch (const Error&) {
    }
  }
}

Channel& ClientBackend::channel_for(const RemoteUrl& url) {
  const auto endpoint = url.endpoint();
  if (auto it = peers_.find(endpoint); it != peers_.end()) return it->second->channel();
  auto peer = open_handle(url, options_, stats_);
  peer->channel().set_handler([this](const Message& m) { return handle(m); });
  auto& ch = peer->channel();
  peers_[endpoint] = std::move(peer);
  return ch;
}

void ClientBackend::prepare(const std::string& url) { channel_for(RemoteUrl::parse(url)); }

Message ClientBackend::request(MsgKind kind, const FrameDef& stub, const std::string& slot,
                               const std::string& origin) {
  auto url = RemoteUrl::parse(stub.url);
  Message m;
  m.kind = kind;
  m.set("token", token_);
  m.set("frame", url.frame);
  if (!slot.empty()) m.set("slot", slot);
  if (origin.empty()) {
    m.set("origin", "self");
  } else {
    m.set("origin", "caller");
    m.set("origin_frame", origin);
    origins_.insert(origin);
  }
  return m;
}

namespace {

Message call_checked(Channel& ch, Message m) {
  auto reply = ch.call(std::move(m));
  if (reply.kind == MsgKind::Error) {
    auto e = error_from(reply);
    throw Error(Errc::RemoteError, std::string(to_string(e.code())) + ": " + e.what(), e.details());
  }
  return reply;
}

}  // namespace

StepResult ClientBackend::get_slot(const FrameDef& stub, const std::string& slot, const std::string& origin) {
  auto m = request(MsgKind::GetSlot, stub, slot, origin);
  auto reply = call_checked(channel_for(RemoteUrl::parse(stub.url)), std::move(m));
  auto r = codec::step_from(reply);
  if (r.question && origin.empty() && r.question->frame == RemoteUrl::parse(stub.url).frame) {
    r.question->frame = stub.name;
  }
  return r;
}

SpecializeProbe ClientBackend::specialize_probe(const FrameDef& candidate, const std::string& origin) {
  auto m = request(MsgKind::GetSlot, candidate, {}, origin);
  m.set("probe", "specialize");
  auto reply = call_checked(channel_for(RemoteUrl::parse(candidate.url)), std::move(m));
  auto result = reply.get("result");
  if (result == "match") return SpecializeProbe::Match;
  if (result == "nomatch") return SpecializeProbe::NoMatch;
  return SpecializeProbe::Open;
}

std::vector<std::string> ClientBackend::check_probe(const FrameDef& stub, const std::string& origin,
                                                    const std::string& slot, const Value& candidate) {
  auto m = request(MsgKind::GetSlot, stub, slot, origin);
  m.set("probe", "check");
  m.body.push_back(interchange::value_to_xml(candidate));
  auto reply = call_checked(channel_for(RemoteUrl::parse(stub.url)), std::move(m));
  return codec::violations_from(reply);
}

xml::Element ClientBackend::get_rules(const std::string& url, const std::string&) {
  auto u = RemoteUrl::parse(url);
  auto& ch = channel_for(u);
  Message m;
  m.kind = MsgKind::GetRules;
  m.set("token", token_);
  m.set("frame", u.frame);
  auto reply = ch.call(std::move(m));
  if (reply.kind == MsgKind::Error) throw error_from(reply);
  if (reply.kind != MsgKind::Rules || reply.body.size() != 1) {
    throw Error(Errc::SchemaError, "malformed rules reply", {"/message", "rules"});
  }
  return std::move(reply.body.front());
}

void ClientBackend::answer(const FrameDef& stub, const std::string&, const std::string& slot, const Value& value) {
  auto u = RemoteUrl::parse(stub.url);
  auto& ch = channel_for(u);
  Message m;
  m.kind = MsgKind::Answer;
  m.set("token", token_);
  m.set("frame", u.frame);
  m.set("slot", slot);
  m.body.push_back(interchange::value_to_xml(value));
  auto reply = ch.call(std::move(m));
  if (reply.kind == MsgKind::Error) {
    auto e = error_from(reply);
    if (e.code() == Errc::ConstraintViolation) throw e;
    throw Error(Errc::RemoteError, std::string(to_string(e.code())) + ": " + e.what(), e.details());
  }
}

Message ClientBackend::handle(const Message& request) {
  if (request.kind != MsgKind::GetSlot) {
    throw Error(Errc::ProtocolViolation, "unexpected " + std::string(to_string(request.kind)) + " callback");
  }
  if (request.get("token") != token_) {
    throw Error(Errc::ProtocolViolation, "callback for an unknown session token");
  }
  const auto origin = request.get("origin_frame");
  const auto slot = request.get("slot");
  if (!origins_.count(origin)) {
    throw Error(Errc::ProtocolViolation, "callback names '" + origin + "', which is not an origin of this session");
  }
  StepResult r;
  if (request.get("probe") == "peek") {
    auto v = session_.callback_peek(origin, slot);
    r = {v.is_known() ? Outcome::Resolved : Outcome::Unknown, v, std::nullopt};
  } else {
    try {
      auto v = session_.callback_read(origin, slot);
      r = {v.is_known() ? Outcome::Resolved : Outcome::Unknown, v, std::nullopt};
    } catch (Suspension& s) {
      r = {Outcome::Suspended, {}, std::move(s.question)};
    }
  }
  return codec::step_to(r);
}

}  // namespace fkb::net
