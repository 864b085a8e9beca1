// SPDX-License-Identifier: Apache-2.0
// Session persistence in the interchange format.
#include <charconv>

#include "fkb/error.hpp"
#include "fkb/interchange.hpp"
#include "fkb/session.hpp"

namespace fkb {

namespace {

using xml::Element;

[[noreturn]] void bad(const std::string& path, const std::string& reason) {
  throw Error(Errc::SchemaError, path + ": " + reason, {path, reason});
}

const std::string& need_attr(const Element& e, std::string_view key, const std::string& path) {
  const auto* v = e.attr(key);
  if (!v) bad(path, "missing attribute '" + std::string(key) + "'");
  return *v;
}

std::uint64_t number(const Element& e, std::string_view key, const std::string& path) {
  const auto& text = need_attr(e, key, path);
  std::uint64_t n = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc{} || ptr != text.data() + text.size()) bad(path, "attribute '" + std::string(key) + "' is not a count");
  return n;
}

Element type_attrs(Element e, const SlotType& t) {
  e.set("type", std::string(to_string(t.kind)));
  if (t.kind == ValueKind::List) e.set("elem", std::string(to_string(t.element)));
  return e;
}

SlotType type_from(const Element& e, const std::string& path) {
  auto k = value_kind_from_string(need_attr(e, "type", path));
  if (!k) bad(path, "unknown type");
  SlotType t{*k};
  if (*k == ValueKind::List) {
    auto el = value_kind_from_string(need_attr(e, "elem", path));
    if (!el) bad(path, "unknown element type");
    t.element = *el;
  }
  return t;
}

Value single_value(const Element& e, const std::string& path) {
  if (e.children.size() != 1) bad(path, "expected one value");
  return interchange::value_from_xml(e.children[0], path + "/" + e.children[0].name);
}

Element event_to_xml(const TraceEvent& ev) {
  Element e("event");
  e.set("seq", std::to_string(ev.seq));
  e.set("kind", std::string(to_string(ev.kind)));
  e.set("frame", ev.frame);
  if (!ev.slot.empty()) e.set("slot", ev.slot);
  if (!ev.source.empty()) e.set("source", ev.source);
  if (!ev.note.empty()) e.set("note", ev.note);
  if (ev.value.is_known()) e.add(interchange::value_to_xml(ev.value));
  return e;
}

TraceEvent event_from_xml(const Element& e, const std::string& path) {
  TraceEvent ev;
  ev.seq = number(e, "seq", path);
  auto kind = trace_kind_from_string(need_attr(e, "kind", path));
  if (!kind) bad(path, "unknown trace kind");
  ev.kind = *kind;
  ev.frame = need_attr(e, "frame", path);
  if (const auto* v = e.attr("slot")) ev.slot = *v;
  if (const auto* v = e.attr("source")) ev.source = *v;
  if (const auto* v = e.attr("note")) ev.note = *v;
  if (!e.children.empty()) ev.value = single_value(e, path);
  return ev;
}

Element question_to_xml(const Question& q) {
  Element e("pending");
  e.set("id", q.id);
  e.set("frame", q.frame);
  e.set("slot", q.slot);
  e.set("prompt", q.prompt);
  e = type_attrs(std::move(e), q.type);
  for (const auto& c : q.choices) e.add(Element("choice")).children.back().add(interchange::value_to_xml(c));
  for (const auto& v : q.violations) e.add(Element("violation").set("text", v));
  return e;
}

Question question_from_xml(const Element& e, const std::string& path) {
  Question q;
  q.id = need_attr(e, "id", path);
  q.frame = need_attr(e, "frame", path);
  q.slot = need_attr(e, "slot", path);
  q.prompt = need_attr(e, "prompt", path);
  q.type = type_from(e, path);
  for (const auto& c : e.children) {
    if (c.name == "choice") {
      q.choices.push_back(single_value(c, path + "/choice"));
    } else if (c.name == "violation") {
      q.violations.push_back(need_attr(c, "text", path + "/violation"));
    } else {
      bad(path + "/" + c.name, "unexpected element");
    }
  }
  return q;
}

}  // namespace

Element Session::trace_to_xml() const {
  Element root("trace");
  for (const auto& ev : trace_) root.add(event_to_xml(ev));
  return root;
}

struct SnapshotCodec {
  static std::string write(const Session& s) {
    Element root("snapshot");
    root.set("version", std::string(interchange::kFormatVersion));
    root.set("world", s.env_->world->version());
    root.set("next_seq", std::to_string(s.next_seq_));
    root.set("next_question", std::to_string(s.next_question_));
    if (s.goal_) root.add(Element("goal").set("frame", s.goal_->first).set("slot", s.goal_->second));
    if (s.pending_) root.add(question_to_xml(*s.pending_));

    Element memory("memory");
    for (const auto& [key, v] : s.memory_.entries()) {
      Element e("entry");
      e.set("frame", key.first).set("slot", key.second).add(interchange::value_to_xml(v));
      memory.add(std::move(e));
    }
    root.add(std::move(memory));

    Element cache("stubcache");
    for (const auto& [key, v] : s.stub_cache_) {
      Element e("entry");
      e.set("frame", std::get<0>(key)).set("slot", std::get<1>(key)).set("origin", std::get<2>(key));
      e.add(interchange::value_to_xml(v));
      cache.add(std::move(e));
    }
    root.add(std::move(cache));

    const auto& c = s.counters_;
    Element counters("counters");
    counters.set("rules_fired", std::to_string(c.rules_fired))
        .set("questions_asked", std::to_string(c.questions_asked))
        .set("remote_calls", std::to_string(c.remote_calls))
        .set("cache_hits", std::to_string(c.cache_hits))
        .set("cache_misses", std::to_string(c.cache_misses))
        .set("rules_fetched", std::to_string(c.rules_fetched))
        .set("rows_read", std::to_string(c.rows_read));
    for (const auto& [frame, n] : c.rules_fired_by_frame) {
      counters.add(Element("fired").set("frame", frame).set("count", std::to_string(n)));
    }
    root.add(std::move(counters));

    Element resolvers("resolvers");
    for (const auto& [frame, id] : s.resolvers_) resolvers.add(Element("assign").set("frame", frame).set("id", id));
    root.add(std::move(resolvers));

    Element overlay("overlay");
    for (const auto& name : s.overlay_order_) overlay.add(interchange::frame_to_xml(s.overlay_.at(name)));
    root.add(std::move(overlay));

    Element fetched("fetched");
    for (const auto& name : s.fetched_) fetched.add(Element("frame").set("name", name));
    root.add(std::move(fetched));

    root.add(s.trace_to_xml());
    return xml::write(root);
  }

  static std::unique_ptr<Session> read(const SessionFactory& factory, std::string_view document) {
    const auto root = xml::parse(document);
    const std::string path = "/snapshot";
    if (root.name != "snapshot") bad("/" + root.name, "expected snapshot");
    if (need_attr(root, "version", path) != interchange::kFormatVersion) {
      throw Error(Errc::VersionUnsupported, "snapshot format version " + *root.attr("version") + " is not supported",
                  {*root.attr("version")});
    }
    const auto& world = need_attr(root, "world", path);
    if (world != factory.world()->version()) {
      throw Error(Errc::WorldVersionMismatch, "snapshot was taken against a different knowledge base",
                  {world, factory.world()->version()});
    }
    auto s = factory.create();
    s->next_seq_ = number(root, "next_seq", path);
    s->next_question_ = number(root, "next_question", path);
    for (const auto& e : root.children) {
      const auto p = path + "/" + e.name;
      if (e.name == "goal") {
        s->goal_ = std::make_pair(need_attr(e, "frame", p), need_attr(e, "slot", p));
      } else if (e.name == "pending") {
        s->pending_ = question_from_xml(e, p);
      } else if (e.name == "memory") {
        for (const auto& entry : e.children) {
          s->memory_.set(need_attr(entry, "frame", p), need_attr(entry, "slot", p), single_value(entry, p + "/entry"));
        }
      } else if (e.name == "stubcache") {
        for (const auto& entry : e.children) {
          s->stub_cache_[{need_attr(entry, "frame", p), need_attr(entry, "slot", p), need_attr(entry, "origin", p)}] =
              single_value(entry, p + "/entry");
        }
      } else if (e.name == "counters") {
        auto& c = s->counters_;
        c.rules_fired = number(e, "rules_fired", p);
        c.questions_asked = number(e, "questions_asked", p);
        c.remote_calls = number(e, "remote_calls", p);
        c.cache_hits = number(e, "cache_hits", p);
        c.cache_misses = number(e, "cache_misses", p);
        c.rules_fetched = number(e, "rules_fetched", p);
        c.rows_read = number(e, "rows_read", p);
        for (const auto& f : e.children) c.rules_fired_by_frame[need_attr(f, "frame", p)] = number(f, "count", p);
      } else if (e.name == "resolvers") {
        for (const auto& a : e.children) s->set_resolver(need_attr(a, "frame", p), need_attr(a, "id", p));
      } else if (e.name == "overlay") {
        for (std::size_t i = 0; i < e.children.size(); ++i) {
          auto f = interchange::frame_from_xml(e.children[i], p + "/frame[" + std::to_string(i + 1) + "]");
          s->overlay_order_.push_back(f.name);
          s->overlay_[f.name] = std::move(f);
        }
      } else if (e.name == "fetched") {
        for (const auto& f : e.children) s->fetched_.insert(need_attr(f, "name", p));
      } else if (e.name == "trace") {
        for (const auto& ev : e.children) s->trace_.push_back(event_from_xml(ev, p + "/event"));
      } else {
        bad(p, "unexpected element");
      }
    }
    return s;
  }
};

std::string Session::snapshot() const { return SnapshotCodec::write(*this); }

std::unique_ptr<Session> Session::restore(const SessionFactory& factory, std::string_view document) {
  return SnapshotCodec::read(factory, document);
}

}  // namespace fkb
