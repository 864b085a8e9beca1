// SPDX-License-Identifier: Apache-2.0
#include "fkb/world.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fkb/error.hpp"
#include "fkb/eval.hpp"

namespace fkb {

const Value* WorkingMemory::find(std::string_view frame, std::string_view slot) const {
  auto it = entries_.find(Key{std::string(frame), std::string(slot)});
  return it == entries_.end() ? nullptr : &it->second;
}

void WorkingMemory::set(const std::string& frame, const std::string& slot, Value value) {
  entries_[Key{frame, slot}] = std::move(value);
}

bool WorkingMemory::erase(const std::string& frame, const std::string& slot) {
  return entries_.erase(Key{frame, slot}) > 0;
}

const SlotDef& parent_slot_def() {
  static const SlotDef def{std::string(kParentSlot), SlotType{ValueKind::Reference}, std::nullopt};
  return def;
}

void WorldBuild::add_frame(FrameDef frame) {
  if (!is_identifier(frame.name)) {
    throw Error(Errc::InvalidIdentifier, "invalid frame name '" + frame.name + "'");
  }
  if (find(frame.name)) {
    throw Error(Errc::DuplicateFrame, "duplicate frame '" + frame.name + "'", {frame.name});
  }
  std::set<std::string> seen;
  for (const auto& slot : frame.slots) {
    if (!is_identifier(slot.name)) {
      throw Error(Errc::InvalidIdentifier, "invalid slot name '" + slot.name + "'");
    }
    if (slot.name == kParentSlot) {
      throw Error(Errc::ReservedSlot,
                  "slot 'parent' is implicit and cannot be declared in frame '" + frame.name + "'",
                  {frame.name, slot.name});
    }
    if (!seen.insert(slot.name).second) {
      throw Error(Errc::DuplicateSlot,
                  "duplicate slot '" + slot.name + "' in frame '" + frame.name + "'",
                  {frame.name, slot.name});
    }
  }
  frames_.push_back(std::move(frame));
}

void WorldBuild::add_extern(const std::string& name, int arity) {
  if (!is_identifier(name)) throw Error(Errc::InvalidIdentifier, "invalid function name '" + name + "'");
  if (arity < 0) throw Error(Errc::ExternArityMismatch, "negative arity for '" + name + "'");
  externs_[name] = arity;
}

FrameDef* WorldBuild::find(std::string_view name) {
  for (auto& f : frames_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const FrameDef* WorldBuild::find(std::string_view name) const {
  for (const auto& f : frames_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

namespace {

// Canonical dump used only for fingerprinting.
void dump(const FrameDef& f, std::string& out) {
  out += "F:" + f.name + "|" + f.parent.value_or("") + "|" + std::string(to_string(f.kind)) + "|" +
         f.url + "|" + f.table + "|" + f.key + "|" + f.rules_from.value_or("") + "\n";
  for (const auto& s : f.slots) {
    out += " S:" + s.name + ":" + s.type.name();
    if (s.default_value) out += "=" + s.default_value->to_literal();
    out += "\n";
  }
  for (const auto& c : f.constraints) out += " C:" + format(*c) + "\n";
  for (const auto& a : f.actions) {
    out += " A:" + std::string(to_string(a.kind)) + ":" + a.slot + ":" + a.prompt;
    if (a.rule) {
      if (a.rule->condition) out += " if " + format(*a.rule->condition);
      for (const auto& [slot, e] : a.rule->assignments) out += " " + slot + ":=" + format(*e);
    }
    if (a.query) {
      const auto& q = *a.query;
      out += " q:" + q.table + "." + q.column + " " + q.key_column + std::string(op_symbol(q.op)) +
             format(*q.key);
    }
    out += "\n";
  }
}

std::string fingerprint(const WorldBuild& build) {
  std::string text;
  for (const auto& f : build.frames()) dump(f, text);
  for (const auto& [name, arity] : build.externs()) text += "E:" + name + "/" + std::to_string(arity) + "\n";
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::shared_ptr<const FrameWorld> FrameWorld::freeze(WorldBuild build) {
  std::shared_ptr<FrameWorld> world(new FrameWorld());
  world->build_ = std::move(build);
  const auto& frames = world->build_.frames();
  for (std::size_t i = 0; i < frames.size(); ++i) world->index_[frames[i].name] = i;

  for (const auto& f : frames) {
    if (!f.parent) continue;
    const auto* p = world->find(*f.parent);
    if (!p || p->kind == FrameKind::Frameset) {
      throw Error(Errc::UnknownParent,
                  "frame '" + f.name + "' has unknown parent '" + *f.parent + "'",
                  {f.name, *f.parent});
    }
    world->children_[*f.parent].push_back(f.name);
  }

  // Static inheritance must be a forest.
  for (const auto& f : frames) {
    std::vector<std::string> path{f.name};
    const FrameDef* cur = &f;
    while (cur->parent) {
      const auto& next = *cur->parent;
      if (auto it = std::find(path.begin(), path.end(), next); it != path.end()) {
        std::vector<std::string> cycle(it, path.end());
        std::string text;
        for (const auto& n : cycle) text += n + " -> ";
        throw Error(Errc::InheritanceCycle, "inheritance cycle: " + text + next, cycle);
      }
      path.push_back(next);
      cur = world->find(next);
    }
  }

  for (const auto& f : frames) {
    for (const auto& s : f.slots) {
      if (s.default_value && !admits(s.type, *s.default_value)) {
        throw Error(Errc::DefaultTypeMismatch,
                    "default " + s.default_value->to_literal() + " of slot '" + f.name + "." +
                        s.name + "' does not fit type " + s.type.name(),
                    {f.name, s.name});
      }
    }
    if (f.constraints.empty()) continue;
    // Constraint slots must be declared somewhere along the static chain,
    // unless the chain leaves this instance through a stub.
    std::set<std::string> visible{std::string(kParentSlot)};
    bool open_chain = false;
    for (const FrameDef* cur = &f; cur;) {
      for (const auto& s : cur->slots) visible.insert(s.name);
      if (cur->kind == FrameKind::RemoteStub) open_chain = true;
      cur = cur->parent ? world->find(*cur->parent) : nullptr;
    }
    if (open_chain) continue;
    for (const auto& c : f.constraints) {
      for (const auto& name : unqualified_slot_refs(*c)) {
        if (!visible.count(name)) {
          throw Error(Errc::UnknownSlotInConstraint,
                      "constraint '" + format(*c) + "' in frame '" + f.name +
                          "' references undeclared slot '" + name + "'",
                      {f.name, name});
        }
      }
    }
  }

  world->version_ = fingerprint(world->build_);
  return world;
}

const FrameDef* FrameWorld::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &build_.frames()[it->second];
}

const FrameDef& FrameSource::at(std::string_view name) const {
  if (const auto* f = find(name)) return *f;
  throw Error(Errc::UnknownFrame, "unknown frame '" + std::string(name) + "'", {std::string(name)});
}

std::vector<std::string> FrameWorld::children(std::string_view name) const {
  auto it = children_.find(name);
  return it == children_.end() ? std::vector<std::string>{} : it->second;
}

bool equal(const WorldBuild& a, const WorldBuild& b) {
  if (a.frames().size() != b.frames().size() || a.externs() != b.externs()) return false;
  for (std::size_t i = 0; i < a.frames().size(); ++i) {
    if (!equal(a.frames()[i], b.frames()[i])) return false;
  }
  return true;
}

bool operator==(const FrameWorld& a, const FrameWorld& b) { return equal(a.build_, b.build_); }

std::vector<std::string> ancestry(const FrameSource& world, std::string_view frame,
                                  const WorkingMemory* memory) {
  std::vector<std::string> chain;
  std::string cur(frame);
  world.at(cur);
  while (true) {
    if (auto it = std::find(chain.begin(), chain.end(), cur); it != chain.end()) {
      std::vector<std::string> cycle(it, chain.end());
      std::string text;
      for (const auto& n : cycle) text += n + " -> ";
      throw Error(Errc::DynamicInheritanceCycle, "dynamic inheritance cycle: " + text + cur, cycle);
    }
    chain.push_back(cur);
    const auto& def = world.at(cur);
    std::optional<std::string> next = def.parent;
    if (memory) {
      if (const auto* v = memory->find(cur, kParentSlot);
          v && v->kind() == ValueKind::Reference) {
        next = v->as_reference();
      }
    }
    if (!next || def.kind == FrameKind::RemoteStub) break;
    cur = *next;
  }
  return chain;
}

SlotLookup slot_lookup(const FrameSource& world, std::string_view frame, std::string_view slot,
                       const WorkingMemory* memory) {
  if (slot == kParentSlot) return {&parent_slot_def(), std::string(frame)};
  for (const auto& name : ancestry(world, frame, memory)) {
    if (const auto* def = world.at(name).find_slot(slot)) return {def, name};
  }
  throw Error(Errc::UnknownSlot,
              "slot '" + std::string(slot) + "' is not declared for frame '" + std::string(frame) + "'",
              {std::string(frame), std::string(slot)});
}

namespace {

class MemoryContext : public EvalContext {
public:
  MemoryContext(std::string frame, std::string slot, const Value& candidate,
                const WorkingMemory& memory)
      : frame_(std::move(frame)), slot_(std::move(slot)), candidate_(candidate), memory_(memory) {}

  Value slot(const Expr& ref) override {
    if (ref.frame.empty() && ref.name == slot_) return candidate_;
    const auto* v = memory_.find(ref.frame.empty() ? frame_ : ref.frame, ref.name);
    return v ? *v : Value::unknown();
  }

private:
  std::string frame_;
  std::string slot_;
  const Value& candidate_;
  const WorkingMemory& memory_;
};

}  // namespace

std::vector<ExprPtr> check_constraints(const FrameSource& world, std::string_view frame,
                                       std::string_view slot, const Value& candidate,
                                       const WorkingMemory& memory) {
  std::vector<ExprPtr> violations;
  MemoryContext ctx(std::string(frame), std::string(slot), candidate, memory);
  for (const auto& name : ancestry(world, frame, &memory)) {
    for (const auto& c : world.at(name).constraints) {
      if (!mentions_slot(*c, std::string(slot))) continue;
      Value v;
      try {
        v = evaluate(*c, ctx);
      } catch (const Error&) {
        violations.push_back(c);
        continue;
      }
      if (v.kind() == ValueKind::Boolean && !v.as_boolean()) violations.push_back(c);
    }
  }
  return violations;
}

}  // namespace fkb
