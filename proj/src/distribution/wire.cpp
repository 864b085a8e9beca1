// SPDX-License-Identifier: Apache-2.0
#include <charconv>

#include "fkb/distribution.hpp"
#include "fkb/error.hpp"

namespace fkb::net {

namespace {

constexpr std::string_view kKindNames[] = {"hello", "get_slot", "slot_value", "get_rules", "rules",
                                           "question", "answer", "error", "bye"};

std::uint64_t parse_id(const std::string& text, const char* what) {
  std::uint64_t n = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(Errc::SchemaError, std::string("message ") + what + " is not a number", {"/message", what});
  }
  return n;
}

}  // namespace

std::string encode_frame(std::string_view payload) {
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(payload.size() + 4);
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

void FrameDecoder::feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameDecoder::next() {
  if (buffered() < 4) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data() + offset_);
  const std::size_t n = (std::size_t{p[0]} << 24) | (std::size_t{p[1]} << 16) | (std::size_t{p[2]} << 8) | p[3];
  if (n > max_) {
    throw Error(Errc::ProtocolViolation, "frame of " + std::to_string(n) + " bytes exceeds the limit",
                {std::to_string(n)});
  }
  if (buffered() < 4 + n) return std::nullopt;
  std::string out = buffer_.substr(offset_ + 4, n);
  offset_ += 4 + n;
  if (offset_ > (1u << 16) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return out;
}

std::string_view to_string(MsgKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<MsgKind> msg_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == name) return static_cast<MsgKind>(i);
  }
  return std::nullopt;
}

const std::string* Message::field(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string Message::get(std::string_view key) const {
  const auto* v = field(key);
  return v ? *v : std::string{};
}

Message& Message::set(std::string key, std::string value) {
  for (auto& [k, v] : fields) {
    if (k == key) {
      v = std::move(value);
      return *this;
    }
  }
  fields.emplace_back(std::move(key), std::move(value));
  return *this;
}

std::string encode_message(const Message& m) {
  xml::Element e("message");
  e.set("kind", std::string(to_string(m.kind)));
  e.set("id", std::to_string(m.id));
  if (m.re) e.set("re", std::to_string(m.re));
  for (const auto& [k, v] : m.fields) e.set(k, v);
  e.children = m.body;
  return xml::write(e);
}

Message decode_message(std::string_view payload) {
  auto e = xml::parse(payload, kMaxMessageBytes);
  if (e.name != "message") throw Error(Errc::SchemaError, "expected <message>", {"/" + e.name, "unexpected element"});
  Message m;
  bool have_kind = false;
  bool have_id = false;
  for (auto& [k, v] : e.attributes) {
    if (k == "kind") {
      auto kind = msg_kind_from_string(v);
      if (!kind) throw Error(Errc::SchemaError, "unknown message kind '" + v + "'", {"/message", "kind"});
      m.kind = *kind;
      have_kind = true;
    } else if (k == "id") {
      m.id = parse_id(v, "id");
      have_id = true;
    } else if (k == "re") {
      m.re = parse_id(v, "re");
    } else {
      m.fields.emplace_back(k, v);
    }
  }
  if (!have_kind || !have_id) throw Error(Errc::SchemaError, "message lacks kind or id", {"/message", "attributes"});
  m.body = std::move(e.children);
  return m;
}

Message error_reply(const Error& e) {
  Message m;
  m.kind = MsgKind::Error;
  m.set("code", std::string(to_string(e.code())));
  m.set("class", e.code() == Errc::SchemaError ? "schema" : "error");
  m.set("text", e.what());
  for (const auto& d : e.details()) {
    xml::Element detail("detail");
    detail.set("text", d);
    m.body.push_back(std::move(detail));
  }
  return m;
}

Error error_from(const Message& reply) {
  auto code = errc_from_string(reply.get("code")).value_or(Errc::RemoteError);
  std::vector<std::string> details;
  for (const auto& d : reply.body) {
    if (const auto* t = d.attr("text")) details.push_back(*t);
  }
  return Error(code, reply.get("text"), std::move(details));
}

std::uint64_t MessageStats::in_count(MsgKind k) const {
  auto it = in.find(std::string(to_string(k)));
  return it == in.end() ? 0 : it->second;
}

std::uint64_t MessageStats::out_count(MsgKind k) const {
  auto it = out.find(std::string(to_string(k)));
  return it == out.end() ? 0 : it->second;
}

std::uint64_t MessageStats::total() const {
  std::uint64_t n = 0;
  for (const auto& [k, v] : in) n += v;
  for (const auto& [k, v] : out) n += v;
  return n;
}

void MessageStats::merge(const MessageStats& other) {
  for (const auto& [k, v] : other.in) in[k] += v;
  for (const auto& [k, v] : other.out) out[k] += v;
  errors += other.errors;
  rules_served += other.rules_served;
  cache_hits += other.cache_hits;
  cache_misses += other.cache_misses;
}

void StatsSink::in(MsgKind k) {
  std::lock_guard lock(mu_);
  ++stats_.in[std::string(to_string(k))];
}

void StatsSink::out(MsgKind k) {
  std::lock_guard lock(mu_);
  ++stats_.out[std::string(to_string(k))];
}

void StatsSink::error() {
  std::lock_guard lock(mu_);
  ++stats_.errors;
}

void StatsSink::rules_served(std::uint64_t n) {
  std::lock_guard lock(mu_);
  stats_.rules_served += n;
}

void StatsSink::cache(std::uint64_t hits, std::uint64_t misses) {
  std::lock_guard lock(mu_);
  stats_.cache_hits += hits;
  stats_.cache_misses += misses;
}

MessageStats StatsSink::snapshot() const {
  std::lock_guard lock(mu_);
  return stats_;
}

RemoteUrl RemoteUrl::parse(std::string_view url) {
  auto fail = [&](const std::string& why) -> RemoteUrl {
    throw Error(Errc::ConnectError, "malformed url '" + std::string(url) + "': " + why, {std::string(url)});
  };
  constexpr std::string_view scheme = "kb://";
  if (url.substr(0, scheme.size()) != scheme) return fail("expected kb://host:port/Frame");
  auto rest = url.substr(scheme.size());
  auto slash = rest.find('/');
  if (slash == std::string_view::npos) return fail("missing frame name");
  auto authority = rest.substr(0, slash);
  auto colon = authority.rfind(':');
  if (colon == std::string_view::npos || colon == 0) return fail("missing port");
  RemoteUrl u;
  u.host = std::string(authority.substr(0, colon));
  auto port_text = authority.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port == 0 || port > 65535) {
    return fail("bad port");
  }
  u.port = static_cast<std::uint16_t>(port);
  u.frame = std::string(rest.substr(slash + 1));
  if (!is_identifier(u.frame)) return fail("bad frame name");
  return u;
}

}  // namespace fkb::net
