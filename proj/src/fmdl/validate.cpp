// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>

#include "fkb/fmdl.hpp"

namespace fkb::fmdl {

namespace {

struct Chain {
  std::set<std::string> slots;
  bool open = false;  // leaves the locally known hierarchy
};

Chain static_chain(const WorldBuild& build, const std::string& frame) {
  Chain chain;
  chain.slots.insert(std::string(kParentSlot));
  std::set<std::string> seen;
  for (const FrameDef* cur = build.find(frame); cur; ) {
    if (!seen.insert(cur->name).second) break;
    for (const auto& s : cur->slots) chain.slots.insert(s.name);
    if (cur->kind == FrameKind::RemoteStub || cur->kind == FrameKind::ExternalObject ||
        cur->kind == FrameKind::Frameset) {
      chain.open = true;
    }
    if (!cur->parent) break;
    cur = build.find(*cur->parent);
    if (!cur) chain.open = true;
  }
  return chain;
}

class Validator {
public:
  Validator(const WorldBuild& build, const SourceMap* sources) : build_(build), sources_(sources) {}

  std::vector<Diagnostic> run() {
    for (const auto& f : build_.frames()) frame(f);
    return std::move(out_);
  }

private:
  SourceSpan frame_span(const std::string& frame) const {
    if (sources_) {
      if (auto it = sources_->frames.find(frame); it != sources_->frames.end()) return it->second;
    }
    return {};
  }

  SourceSpan member_span(const std::map<std::pair<std::string, std::size_t>, SourceSpan>* table,
                         const std::string& frame, std::size_t index) const {
    if (table) {
      if (auto it = table->find({frame, index}); it != table->end()) return it->second;
    }
    return frame_span(frame);
  }

  void error(SourceSpan span, std::string code, std::string message) {
    out_.push_back({Severity::Error, std::move(span), std::move(code), std::move(message)});
  }
  void warning(SourceSpan span, std::string code, std::string message) {
    out_.push_back({Severity::Warning, std::move(span), std::move(code), std::move(message)});
  }

  void frame(const FrameDef& f) {
    if (f.parent) {
      const auto* p = build_.find(*f.parent);
      if (!p || p->kind == FrameKind::Frameset) {
        error(frame_span(f.name), "unknown-parent",
              "frame '" + f.name + "' has unknown parent '" + *f.parent + "'");
      } else {
        check_cycle(f);
      }
    }
    const auto* slot_spans = sources_ ? &sources_->slots : nullptr;
    for (std::size_t i = 0; i < f.slots.size(); ++i) {
      const auto& s = f.slots[i];
      if (s.default_value && !admits(s.type, *s.default_value)) {
        error(member_span(slot_spans, f.name, i), "default-type-mismatch",
              "default " + s.default_value->to_literal() + " of slot '" + f.name + "." + s.name +
                  "' does not fit type " + s.type.name());
      }
    }

    const auto chain = static_chain(build_, f.name);
    const auto* constraint_spans = sources_ ? &sources_->constraints : nullptr;
    for (std::size_t i = 0; i < f.constraints.size(); ++i) {
      const auto& c = *f.constraints[i];
      if (chain.open) continue;
      for (const auto& name : unqualified_slot_refs(c)) {
        if (!chain.slots.count(name)) {
          error(member_span(constraint_spans, f.name, i), "unknown-slot-in-constraint",
                "constraint '" + format(c) + "' in frame '" + f.name + "' references undeclared slot '" +
                    name + "'");
        }
      }
      expression(c, f.name, chain, member_span(constraint_spans, f.name, i), true);
    }

    const auto* action_spans = sources_ ? &sources_->actions : nullptr;
    for (std::size_t i = 0; i < f.actions.size(); ++i) {
      const auto& a = f.actions[i];
      const auto span = member_span(action_spans, f.name, i);
      if (!chain.open && !chain.slots.count(a.slot)) {
        warning(span, "unknown-slot-ref",
                "slot '" + a.slot + "' is not declared along the static chain of '" + f.name + "'");
      }
      if (a.rule) {
        if (a.rule->condition) expression(*a.rule->condition, f.name, chain, span, false);
        for (const auto& [slot, value] : a.rule->assignments) {
          if (slot != a.slot && !chain.open && !chain.slots.count(slot)) {
            warning(span, "unknown-slot-ref",
                    "slot '" + slot + "' is not declared along the static chain of '" + f.name + "'");
          }
          expression(*value, f.name, chain, span, false);
        }
      }
      if (a.query) {
        const auto* table = build_.find(a.query->table);
        if (!table || table->kind != FrameKind::Frameset) {
          error(span, "unknown-table", "query refers to unknown frameset '" + a.query->table + "'");
        }
        expression(*a.query->key, f.name, chain, span, false);
      }
    }
  }

  void check_cycle(const FrameDef& f) {
    std::vector<std::string> path{f.name};
    for (const FrameDef* cur = &f; cur && cur->parent;) {
      const auto& next = *cur->parent;
      if (next == f.name) {
        std::string text;
        for (const auto& n : path) text += n + " -> ";
        error(frame_span(f.name), "inheritance-cycle", "inheritance cycle: " + text + next);
        return;
      }
      if (std::find(path.begin(), path.end(), next) != path.end()) return;  // reported at its own member
      path.push_back(next);
      cur = build_.find(next);
    }
  }

  void expression(const Expr& e, const std::string& frame, const Chain& chain, const SourceSpan& span,
                  bool in_constraint, const std::set<std::string>& bound = {}) {
    switch (e.op) {
      case ExprOp::SlotRef:
        if (e.frame.empty()) {
          if (!in_constraint && !chain.open && !chain.slots.count(e.name)) {
            warning(span, "unknown-slot-ref",
                    "slot '" + e.name + "' is not declared along the static chain of '" + frame + "'");
          }
        } else if (!bound.count(e.frame)) {
          if (!build_.find(e.frame)) {
            error(span, "unknown-frame", "reference to unknown frame '" + e.frame + "'");
          } else {
            auto other = static_chain(build_, e.frame);
            if (!other.open && !other.slots.count(e.name)) {
              warning(span, "unknown-slot-ref",
                      "slot '" + e.name + "' is not declared along the static chain of '" + e.frame + "'");
            }
          }
        }
        return;
      case ExprOp::Literal:
        if (e.literal.kind() == ValueKind::Reference && !build_.find(e.literal.as_reference())) {
          warning(span, "dangling-reference", "reference to undeclared frame '" + e.literal.as_reference() + "'");
        }
        return;
      case ExprOp::Call: {
        auto it = build_.externs().find(e.name);
        if (it == build_.externs().end()) {
          error(span, "unknown-function", "call to undeclared function '" + e.name + "'");
        } else if (static_cast<std::size_t>(it->second) != e.args.size()) {
          error(span, "arity-mismatch",
                "function '" + e.name + "' takes " + std::to_string(it->second) + " argument(s), given " +
                    std::to_string(e.args.size()));
        }
        break;
      }
      case ExprOp::Exists: {
        if (!build_.find(e.frame)) error(span, "unknown-frame", "search root '" + e.frame + "' is not declared");
        auto inner = bound;
        inner.insert(e.name);
        expression(*e.args[0], frame, chain, span, in_constraint, inner);
        return;
      }
      case ExprOp::Specialize:
        if (!build_.find(e.frame)) error(span, "unknown-frame", "specialization root '" + e.frame + "' is not declared");
        return;
      default: break;
    }
    for (const auto& a : e.args) expression(*a, frame, chain, span, in_constraint, bound);
  }

  const WorldBuild& build_;
  const SourceMap* sources_;
  std::vector<Diagnostic> out_;
};

}  // namespace

std::vector<Diagnostic> validate(const WorldBuild& build, const SourceMap* sources) {
  return Validator(build, sources).run();
}

}  // namespace fkb::fmdl
