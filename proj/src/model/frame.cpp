// SPDX-License-Identifier: Apache-2.0
#include "fkb/frame.hpp"

namespace fkb {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::BackwardRule: return "backward_rule";
    case ActionKind::ForwardRule: return "forward_rule";
    case ActionKind::AskUser: return "ask_user";
    case ActionKind::QueryValue: return "query_value";
  }
  return "";
}

std::string_view to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::Local: return "local";
    case FrameKind::RemoteStub: return "remote";
    case FrameKind::Frameset: return "frameset";
    case FrameKind::ExternalObject: return "external";
    case FrameKind::FramesetMember: return "member";
  }
  return "";
}

Action Action::backward(Rule r) {
  r.direction = Direction::Backward;
  Action a;
  a.kind = ActionKind::BackwardRule;
  a.slot = r.target_slot;
  a.rule = std::move(r);
  return a;
}

Action Action::forward(Rule r) {
  r.direction = Direction::Forward;
  Action a;
  a.kind = ActionKind::ForwardRule;
  a.slot = r.target_slot;
  a.rule = std::move(r);
  return a;
}

Action Action::ask(std::string slot, std::string prompt) {
  Action a;
  a.kind = ActionKind::AskUser;
  a.slot = std::move(slot);
  a.prompt = std::move(prompt);
  return a;
}

Action Action::query_value(std::string slot, QuerySpec q) {
  Action a;
  a.kind = ActionKind::QueryValue;
  a.slot = std::move(slot);
  a.query = std::move(q);
  return a;
}

const SlotDef* FrameDef::find_slot(std::string_view slot) const {
  for (const auto& s : slots) {
    if (s.name == slot) return &s;
  }
  return nullptr;
}

bool equal(const Rule& a, const Rule& b) {
  if (a.target_slot != b.target_slot || a.direction != b.direction) return false;
  if (!equal(a.condition, b.condition)) return false;
  if (a.assignments.size() != b.assignments.size()) return false;
  for (std::size_t i = 0; i < a.assignments.size(); ++i) {
    if (a.assignments[i].first != b.assignments[i].first) return false;
    if (!equal(a.assignments[i].second, b.assignments[i].second)) return false;
  }
  return true;
}

bool equal(const Action& a, const Action& b) {
  if (a.kind != b.kind || a.slot != b.slot || a.prompt != b.prompt) return false;
  if (a.rule.has_value() != b.rule.has_value()) return false;
  if (a.rule && !equal(*a.rule, *b.rule)) return false;
  if (a.query.has_value() != b.query.has_value()) return false;
  if (a.query) {
    const auto& x = *a.query;
    const auto& y = *b.query;
    if (x.table != y.table || x.column != y.column || x.key_column != y.key_column ||
        x.op != y.op || !equal(x.key, y.key)) {
      return false;
    }
  }
  return true;
}

bool equal(const FrameDef& a, const FrameDef& b) {
  if (a.name != b.name || a.parent != b.parent || a.kind != b.kind || a.url != b.url ||
      a.table != b.table || a.key != b.key || a.rules_from != b.rules_from) {
    return false;
  }
  if (a.slots.size() != b.slots.size() || a.constraints.size() != b.constraints.size() ||
      a.actions.size() != b.actions.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.slots.size(); ++i) {
    const auto& x = a.slots[i];
    const auto& y = b.slots[i];
    if (x.name != y.name || !(x.type == y.type) || x.default_value != y.default_value) return false;
  }
  for (std::size_t i = 0; i < a.constraints.size(); ++i) {
    if (!equal(a.constraints[i], b.constraints[i])) return false;
  }
  for (std::size_t i = 0; i < a.actions.size(); ++i) {
    if (!equal(a.actions[i], b.actions[i])) return false;
  }
  return true;
}

}  // namespace fkb
