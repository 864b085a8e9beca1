// SPDX-License-Identifier: Apache-2.0
// Message payloads shared by client and server.
#pragma once

#include "fkb/distribution.hpp"
#include "fkb/error.hpp"

namespace fkb::net::codec {

inline xml::Element type_to_xml(const SlotType& t) {
  xml::Element e("type");
  e.set("kind", std::string(to_string(t.kind)));
  if (t.kind == ValueKind::List) e.set("elem", std::string(to_string(t.element)));
  return e;
}

inline SlotType type_from_xml(const xml::Element& e) {
  SlotType t;
  auto kind = e.attr("kind") ? value_kind_from_string(*e.attr("kind")) : std::nullopt;
  if (!kind) throw Error(Errc::SchemaError, "question type lacks a kind", {"/message/type", "kind"});
  t.kind = *kind;
  if (const auto* el = e.attr("elem")) {
    auto k = value_kind_from_string(*el);
    if (!k) throw Error(Errc::SchemaError, "unknown element kind '" + *el + "'", {"/message/type", "elem"});
    t.element = *k;
  }
  return t;
}

inline Message question_to(const Question& q) {
  Message m;
  m.kind = MsgKind::Question;
  if (!q.id.empty()) m.set("qid", q.id);
  m.set("frame", q.frame);
  m.set("slot", q.slot);
  m.set("prompt", q.prompt);
  m.body.push_back(type_to_xml(q.type));
  for (const auto& c : q.choices) {
    xml::Element e("choice");
    e.add(interchange::value_to_xml(c));
    m.body.push_back(std::move(e));
  }
  for (const auto& v : q.violations) {
    xml::Element e("violation");
    e.set("text", v);
    m.body.push_back(std::move(e));
  }
  return m;
}

inline Question question_from(const Message& m) {
  Question q;
  q.id = m.get("qid");
  q.frame = m.get("frame");
  q.slot = m.get("slot");
  q.prompt = m.get("prompt");
  for (const auto& e : m.body) {
    if (e.name == "type") {
      q.type = type_from_xml(e);
    } else if (e.name == "choice" && e.children.size() == 1) {
      q.choices.push_back(interchange::value_from_xml(e.children[0], "/message/choice"));
    } else if (e.name == "violation" && e.attr("text")) {
      q.violations.push_back(*e.attr("text"));
    }
  }
  return q;
}

/// slot_value or question message for a step.
inline Message step_to(const StepResult& r) {
  if (r.outcome == Outcome::Suspended && r.question) return question_to(*r.question);
  Message m;
  m.kind = MsgKind::SlotValue;
  m.set("outcome", r.outcome == Outcome::Resolved ? "resolved" : "unknown");
  if (r.outcome == Outcome::Resolved) m.body.push_back(interchange::value_to_xml(r.value));
  return m;
}

inline StepResult step_from(const Message& m) {
  if (m.kind == MsgKind::Question) return {Outcome::Suspended, {}, question_from(m)};
  if (m.kind != MsgKind::SlotValue) {
    throw Error(Errc::ProtocolViolation, "expected slot_value, got " + std::string(to_string(m.kind)));
  }
  if (m.get("outcome") != "resolved") return {Outcome::Unknown, {}, std::nullopt};
  if (m.body.empty()) throw Error(Errc::SchemaError, "resolved slot_value without a value", {"/message", "value"});
  return {Outcome::Resolved, interchange::value_from_xml(m.body[0], "/message/value"), std::nullopt};
}

inline Message violations_to(const std::vector<std::string>& violations) {
  Message m;
  m.kind = MsgKind::SlotValue;
  m.set("outcome", "checked");
  for (const auto& v : violations) {
    xml::Element e("violation");
    e.set("text", v);
    m.body.push_back(std::move(e));
  }
  return m;
}

inline std::vector<std::string> violations_from(const Message& m) {
  std::vector<std::string> out;
  for (const auto& e : m.body) {
    if (e.name == "violation" && e.attr("text")) out.push_back(*e.attr("text"));
  }
  return out;
}

}  // namespace fkb::net::codec
