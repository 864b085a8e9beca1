// SPDX-License-Identifier: Apache-2.0
#include "fkb/session.hpp"

#include <algorithm>

#include "fkb/error.hpp"
#include "fkb/eval.hpp"
#include "fkb/interchange.hpp"

namespace fkb {

namespace {

constexpr std::string_view kTraceNames[] = {
    "goal_pushed",      "rule_tried",      "rule_fired",  "rule_skipped", "value_assigned",
    "question_emitted", "answer_received", "remote_call", "cache_hit",    "warning",
};

std::string source_of(const std::string& level, std::size_t index) { return level + "#" + std::to_string(index); }

bool has_parent_actions(const FrameDef& f) {
  return std::any_of(f.actions.begin(), f.actions.end(), [](const Action& a) {
    return a.slot == kParentSlot && a.kind != ActionKind::ForwardRule;
  });
}

// Pulls `slot in [literals]` choices out of a constraint.
std::optional<std::vector<Value>> choice_list(const Expr& c, const std::string& slot) {
  if (c.op != ExprOp::In) return std::nullopt;
  const auto& lhs = *c.args[0];
  const auto& rhs = *c.args[1];
  if (lhs.op != ExprOp::SlotRef || !lhs.frame.empty() || lhs.name != slot) return std::nullopt;
  if (rhs.op == ExprOp::Literal && rhs.literal.kind() == ValueKind::List) return rhs.literal.items();
  if (rhs.op != ExprOp::ListLit) return std::nullopt;
  std::vector<Value> out;
  for (const auto& item : rhs.args) {
    if (item->op != ExprOp::Literal) return std::nullopt;
    out.push_back(item->literal);
  }
  return out;
}

}  // namespace

std::string_view to_string(TraceKind kind) { return kTraceNames[static_cast<int>(kind)]; }

std::optional<TraceKind> trace_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kTraceNames); ++i) {
    if (kTraceNames[i] == name) return static_cast<TraceKind>(i);
  }
  return std::nullopt;
}

std::string to_string(const TraceEvent& e) {
  std::string out = std::to_string(e.seq) + " " + std::string(to_string(e.kind)) + " " + e.frame;
  if (!e.slot.empty()) out += "." + e.slot;
  if (!e.source.empty()) out += " [" + e.source + "]";
  if (e.value.is_known()) out += " = " + e.value.to_literal();
  if (!e.note.empty()) out += " (" + e.note + ")";
  return out;
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Resolved: return "resolved";
    case Outcome::Unknown: return "unknown";
    case Outcome::Suspended: return "suspended";
  }
  return "?";
}

std::string_view to_string(SpecializeProbe probe) {
  switch (probe) {
    case SpecializeProbe::Match: return "match";
    case SpecializeProbe::NoMatch: return "nomatch";
    case SpecializeProbe::Open: return "open";
  }
  return "?";
}

// ---- factory ----------------------------------------------------------------

SessionFactory::SessionFactory(std::shared_ptr<const FrameWorld> world, SessionOptions options)
    : env_(std::make_shared<Environment>()) {
  env_->world = std::move(world);
  env_->options = std::move(options);
  env_->resolvers.get(env_->options.default_resolver);
  for (const auto& f : env_->world->frames()) {
    if (f.kind != FrameKind::Frameset) continue;
    std::filesystem::path location = f.table;
    if (location.is_relative()) location = env_->world->base_dir() / location;
    env_->tables[f.name] = TableSource::open(location, f.key);
  }
}

void SessionFactory::register_extern(const std::string& name, int arity, ExternFunction fn) {
  const auto& declared = env_->world->externs();
  auto it = declared.find(name);
  if (it == declared.end()) {
    throw Error(Errc::UnknownExtern, "function '" + name + "' is not declared extern", {name});
  }
  if (it->second != arity) {
    throw Error(Errc::ExternArityMismatch,
                "function '" + name + "' is declared with arity " + std::to_string(it->second) + ", not " +
                    std::to_string(arity),
                {name, std::to_string(it->second), std::to_string(arity)});
  }
  env_->externs[name] = {arity, std::move(fn)};
}

void SessionFactory::register_adapter(const std::string& frame, ExternalAdapter adapter) {
  const auto* f = env_->world->find(frame);
  if (!f || f->kind != FrameKind::ExternalObject) {
    throw Error(Errc::UnknownFrame, "'" + frame + "' is not an external object frame", {frame});
  }
  env_->adapters[frame] = std::move(adapter);
}

void SessionFactory::register_resolver(const std::string& id, std::shared_ptr<const ConflictResolver> resolver) {
  env_->resolvers.add(id, std::move(resolver));
}

void SessionFactory::assign_resolver(const std::string& frame, const std::string& id) {
  env_->world->at(frame);
  env_->resolvers.get(id);
  env_->frame_resolvers[frame] = id;
}

void SessionFactory::set_remote(RemoteConnector connector) { env_->remote = std::move(connector); }

std::shared_ptr<const TableSource> SessionFactory::table(const std::string& frameset) const {
  auto it = env_->tables.find(frameset);
  return it == env_->tables.end() ? nullptr : it->second;
}

std::unique_ptr<Session> SessionFactory::create() const { return std::make_unique<Session>(env_); }

// ---- evaluation context -------------------------------------------------------

/// Resolves expression leaves against a session: unqualified refs read the
/// origin, qualified refs and bound variables read that frame as its own
/// origin.
class SessionContext : public EvalContext {
public:
  SessionContext(Session& s, std::string origin, std::map<std::string, std::string> bindings = {})
      : s_(s), origin_(std::move(origin)), bindings_(std::move(bindings)) {}

  Value slot(const Expr& ref) override {
    if (ref.frame.empty()) return s_.read_origin(origin_, ref.name);
    if (auto it = bindings_.find(ref.frame); it != bindings_.end()) return s_.need(it->second, ref.name);
    return s_.need(ref.frame, ref.name);
  }

  Value call(const Expr& node, std::vector<Value> args) override { return s_.call_extern(node, args); }

  Value exists(const Expr& node) override { return s_.exists_with(origin_, node, bindings_); }

  Value specialize(const Expr& node) override { return s_.specify_frame(origin_, node.frame); }

private:
  Session& s_;
  std::string origin_;
  std::map<std::string, std::string> bindings_;
};

// ---- session ------------------------------------------------------------------

class Session::GoalGuard {
public:
  GoalGuard(Session& s, const std::string& origin, const std::string& slot) : s_(s) {
    s_.stack_.push_back({origin, slot});
    s_.emit(TraceKind::GoalPushed, origin, slot);
  }
  ~GoalGuard() { s_.stack_.pop_back(); }
  GoalGuard(const GoalGuard&) = delete;
  GoalGuard& operator=(const GoalGuard&) = delete;

private:
  Session& s_;
};

namespace {

class ProxyScope {
public:
  ProxyScope(OriginProxy*& slot, OriginProxy* value) : slot_(slot), saved_(slot) { slot_ = value; }
  ~ProxyScope() { slot_ = saved_; }

private:
  OriginProxy*& slot_;
  OriginProxy* saved_;
};

class DepthGuard {
public:
  DepthGuard(int& depth, int limit) : depth_(depth) {
    if (++depth_ > limit) {
      --depth_;
      throw Error(Errc::CascadeLimitExceeded, "forward-chaining cascade deeper than " + std::to_string(limit),
                  {std::to_string(limit)});
    }
  }
  ~DepthGuard() { --depth_; }

private:
  int& depth_;
};

}  // namespace

Session::Session(std::shared_ptr<const SessionFactory::Environment> env) : env_(std::move(env)) {}

Session::~Session() = default;

void Session::emit(TraceKind kind, std::string frame, std::string slot, std::string source, Value value,
                   std::string note) {
  trace_.push_back({next_seq_++, kind, std::move(frame), std::move(slot), std::move(source), std::move(value),
                    std::move(note)});
}

bool Session::on_stack(const std::string& origin, const std::string& slot) const {
  return std::any_of(stack_.begin(), stack_.end(),
                     [&](const Goal& g) { return g.origin == origin && g.slot == slot; });
}

// ---- frame space ----------------------------------------------------------------

const FrameDef* Session::find(std::string_view name) const {
  if (auto it = overlay_.find(std::string(name)); it != overlay_.end()) return &it->second;
  if (const auto* f = env_->world->find(name)) return f;
  if (auto it = members_.find(name); it != members_.end()) return &it->second;
  // `<frameset>_<key>`: try every split point.
  for (auto pos = name.find('_'); pos != std::string_view::npos; pos = name.find('_', pos + 1)) {
    const auto* fs = env_->world->find(name.substr(0, pos));
    if (!fs || fs->kind != FrameKind::Frameset) continue;
    auto t = env_->tables.find(fs->name);
    if (t == env_->tables.end()) continue;
    const std::string key(name.substr(pos + 1));
    if (!t->second->contains(key)) continue;
    auto [it, _] = members_.emplace(std::string(name), member_frame(*fs, *t->second, key));
    return &it->second;
  }
  return nullptr;
}

std::vector<std::string> Session::children(std::string_view name) const {
  std::vector<std::string> out;
  for (const auto& c : env_->world->children(name)) {
    const auto* f = env_->world->find(c);
    if (f && f->kind == FrameKind::Frameset) {
      if (auto t = env_->tables.find(c); t != env_->tables.end()) {
        for (const auto& key : t->second->keys()) out.push_back(member_name(c, key));
      }
      continue;
    }
    out.push_back(c);
  }
  for (const auto& g : overlay_order_) {
    const auto& f = overlay_.at(g);
    if (!env_->world->find(g) && f.parent && *f.parent == name) out.push_back(g);
  }
  return out;
}

std::string Session::resolver_for(const std::string& frame) const {
  if (auto it = resolvers_.find(frame); it != resolvers_.end()) return it->second;
  if (auto it = env_->frame_resolvers.find(frame); it != env_->frame_resolvers.end()) return it->second;
  return env_->options.default_resolver;
}

std::string Session::level_resolver(const std::string& frame) const { return resolver_for(frame); }

void Session::set_resolver(const std::string& frame, const std::string& id) {
  at(frame);
  env_->resolvers.get(id);
  resolvers_[frame] = id;
}

RemoteBackend* Session::remote() {
  if (!remote_made_) {
    remote_made_ = true;
    if (env_->remote) remote_ = env_->remote(*this);
  }
  return remote_.get();
}

void Session::ensure_rules(const FrameDef& level) {
  if (!level.rules_from || fetched_.count(level.name)) return;
  fetched_.insert(level.name);
  const std::string name = level.name;
  const std::string url = *level.rules_from;
  auto* backend = remote();
  if (!backend) {
    emit(TraceKind::Warning, name, {}, url, {}, "no remote connector; rules not fetched");
    return;
  }
  try {
    auto rules = backend->get_rules(url, name);
    FrameDef merged = level;
    interchange::merge_rules(merged, rules, this);
    overlay_[name] = std::move(merged);
    if (std::find(overlay_order_.begin(), overlay_order_.end(), name) == overlay_order_.end()) {
      overlay_order_.push_back(name);
    }
    ++counters_.rules_fetched;
  } catch (const Error& e) {
    if (e.code() == Errc::UntypedRemoteSlot || e.code() == Errc::SchemaError) throw;
    emit(TraceKind::Warning, name, {}, url, {}, std::string("rules unavailable: ") + e.what());
  }
}

std::vector<std::string> Session::chain_for(const std::string& origin) {
  const auto& f = at(origin);
  ensure_rules(f);
  const auto& g = at(origin);
  if (!memory_.find(origin, kParentSlot) && has_parent_actions(g) && !on_stack(origin, std::string(kParentSlot))) {
    need(origin, std::string(kParentSlot));
  }
  return ancestry(*this, origin, &memory_);
}

const SlotDef* Session::declaration(const std::vector<std::string>& chain, const std::string& slot) const {
  if (slot == kParentSlot) return &parent_slot_def();
  for (const auto& level : chain) {
    const auto& f = at(level);
    if (f.kind == FrameKind::RemoteStub) return f.find_slot(slot);
    if (const auto* d = f.find_slot(slot)) return d;
  }
  return nullptr;
}

// ---- demand-driven inference ----------------------------------------------------

Value Session::read_origin(const std::string& origin, const std::string& slot) {
  if (proxy_ && origin == proxy_->frame()) return proxy_->read(slot);
  return need(origin, slot);
}

Value Session::need(const std::string& origin, const std::string& slot) {
  if (const auto* v = memory_.find(origin, slot)) return *v;
  const auto& f = at(origin);
  if (f.kind == FrameKind::FramesetMember && f.declares(slot)) return member_slot(f, slot);
  if (f.kind == FrameKind::ExternalObject && slot != kParentSlot) return external_slot(f, slot);
  if (on_stack(origin, slot)) return Value::unknown();
  GoalGuard guard(*this, origin, slot);
  auto v = walk(origin, slot, std::nullopt, true);
  if (slot == kParentSlot && v.is_unknown() && f.parent) return Value::reference(*f.parent);
  return v;
}

Value Session::member_slot(const FrameDef& member, const std::string& slot) {
  auto table = env_->tables.at(member.table);
  const auto& row = cached_row(member.table, *table, member.key);
  auto idx = table->column_index(slot);
  if (!idx || *idx >= row.size()) return Value::unknown();
  return row[*idx];
}

Value Session::external_slot(const FrameDef& frame, const std::string& slot) {
  if (const auto* v = memory_.find(frame.name, slot)) return *v;
  auto it = env_->adapters.find(frame.name);
  if (it == env_->adapters.end() || !it->second.read) {
    emit(TraceKind::Warning, frame.name, slot, {}, {}, "no adapter registered");
    return Value::unknown();
  }
  std::optional<Value> got;
  try {
    got = it->second.read(slot);
  } catch (const std::exception& e) {
    emit(TraceKind::Warning, frame.name, slot, {}, {}, std::string("adapter failed: ") + e.what());
    return Value::unknown();
  }
  if (!got || got->is_unknown()) {
    emit(TraceKind::Warning, frame.name, slot, {}, {}, "adapter has no such slot");
    return Value::unknown();
  }
  Value v = *got;
  if (const auto* def = frame.find_slot(slot)) {
    v = conform(def->type, v);
    if (!admits(def->type, v)) {
      emit(TraceKind::Warning, frame.name, slot, {}, v, "adapter value does not fit " + def->type.name());
      return Value::unknown();
    }
  }
  memory_.set(frame.name, slot, v);
  emit(TraceKind::ValueAssigned, frame.name, slot, "adapter", v);
  return v;
}

Value Session::walk(const std::string& origin, const std::string& slot, std::optional<std::string> start_level,
                    bool store_result) {
  std::vector<std::string> chain;
  if (slot == kParentSlot) {
    chain = {start_level.value_or(origin)};
  } else if (start_level) {
    chain = ancestry(*this, *start_level, &memory_);
  } else {
    chain = chain_for(origin);
  }

  // The span ends at the nearest declaration, or at a stub that forwards.
  std::size_t span = 0;
  const SlotDef* decl = nullptr;
  bool forwards = false;
  for (; span < chain.size(); ++span) {
    ensure_rules(at(chain[span]));
    const auto& f = at(chain[span]);
    if (f.kind == FrameKind::RemoteStub) {
      forwards = true;
      break;
    }
    decl = slot == kParentSlot ? &parent_slot_def() : f.find_slot(slot);
    if (decl) break;
  }
  if (!decl && !forwards) {
    throw Error(Errc::UnknownSlot, "slot '" + slot + "' is not declared for frame '" + origin + "'",
                {origin, slot});
  }

  const auto last = std::min(span, chain.size() - 1);
  for (std::size_t li = 0; li <= last; ++li) {
    const std::string level = chain[li];
    const auto& lf = at(level);
    if (lf.kind == FrameKind::RemoteStub) {
      auto v = remote_slot(lf, slot, origin == lf.name ? std::string{} : origin);
      return v;
    }
    std::vector<Action> candidates;
    for (const auto& a : lf.actions) {
      if (a.slot == slot && a.kind != ActionKind::ForwardRule) candidates.push_back(a);
    }
    if (candidates.empty()) continue;
    auto ordered = select_actions(env_->resolvers, level_resolver(level), candidates, *this);
    std::vector<bool> used(lf.actions.size(), false);
    for (const auto& a : ordered) {
      std::size_t idx = 0;
      for (; idx < lf.actions.size(); ++idx) {
        if (!used[idx] && equal(lf.actions[idx], a)) break;
      }
      if (idx < used.size()) used[idx] = true;
      switch (a.kind) {
        case ActionKind::BackwardRule: {
          Value out;
          if (try_rule(a, level, idx, origin, slot, decl, chain, store_result, out)) return out;
          break;
        }
        case ActionKind::QueryValue: {
          Value out;
          if (try_query(a, level, idx, origin, slot, decl, chain, store_result, out)) return out;
          break;
        }
        case ActionKind::AskUser: {
          Question q;
          q.frame = origin;
          q.slot = slot;
          q.prompt = a.prompt;
          if (decl) q.type = decl->type;
          q.choices = choices(origin, slot, chain);
          throw Suspension{std::move(q)};
        }
        case ActionKind::ForwardRule: break;
      }
    }
  }

  if (decl && decl->default_value) {
    Value v = conform(decl->type, *decl->default_value);
    if (store_result) {
      memory_.set(origin, slot, v);
      emit(TraceKind::ValueAssigned, origin, slot, chain[last], v, "default");
    }
    return v;
  }
  return Value::unknown();
}

bool Session::gate(const Value& condition) {
  if (condition.is_unknown()) return false;
  if (condition.kind() == ValueKind::Boolean) return condition.as_boolean();
  if (condition.kind() == ValueKind::Reference) return true;
  throw Error(Errc::EvalError,
              "condition is " + std::string(to_string(condition.kind())) + ", expected boolean");
}

std::optional<std::string> Session::admissible(const std::string& origin, const std::string& slot, Value& v,
                                               const SlotDef* decl, const std::vector<std::string>& chain) {
  if (decl) {
    v = conform(decl->type, v);
    if (!admits(decl->type, v)) {
      return "value " + v.to_literal() + " does not fit " + decl->type.name();
    }
  }
  const bool remote_origin = proxy_ && origin == proxy_->frame();
  if (!remote_origin) {
    const auto& f = at(origin);
    if (f.kind == FrameKind::FramesetMember && f.declares(slot)) return std::string("read-only frameset member slot");
  }
  if (slot == kParentSlot && !remote_origin) {
    WorkingMemory probe = memory_;
    probe.set(origin, slot, v);
    try {
      ancestry(*this, origin, &probe);
    } catch (const Error& e) {
      return std::string(e.what());
    }
  }
  auto bad = violations(origin, slot, v, chain);
  if (!bad.empty()) {
    std::string text = "constraint violated: ";
    for (std::size_t i = 0; i < bad.size(); ++i) text += (i ? "; " : "") + bad[i];
    return text;
  }
  return std::nullopt;
}

bool Session::try_rule(const Action& action, const std::string& level, std::size_t index, const std::string& origin,
                       const std::string& slot, const SlotDef* decl, const std::vector<std::string>& chain,
                       bool store_result, Value& out) {
  const auto source = source_of(level, index);
  emit(TraceKind::RuleTried, origin, slot, source);
  const auto& rule = *action.rule;
  Value v;
  try {
    SessionContext ctx(*this, origin);
    if (rule.condition) {
      auto c = evaluate(*rule.condition, ctx);
      if (!gate(c)) {
        emit(TraceKind::RuleSkipped, origin, slot, source, {}, c.is_unknown() ? "condition unknown" : "condition false");
        return false;
      }
    }
    for (const auto& [target, value] : rule.assignments) {
      if (target == slot) v = evaluate(*value, ctx);
    }
    if (v.is_unknown()) {
      emit(TraceKind::RuleSkipped, origin, slot, source, {}, "value unknown");
      return false;
    }
    if (auto why = admissible(origin, slot, v, decl, chain)) {
      emit(TraceKind::RuleSkipped, origin, slot, source, v, *why);
      return false;
    }
  } catch (const Error& e) {
    if (e.code() == Errc::CascadeLimitExceeded) throw;
    emit(TraceKind::RuleSkipped, origin, slot, source, {}, e.what());
    return false;
  }
  emit(TraceKind::RuleFired, origin, slot, source, v);
  ++counters_.rules_fired;
  ++counters_.rules_fired_by_frame[level];
  if (store_result) store(origin, slot, v, true, source);
  out = v;
  return true;
}

bool Session::try_query(const Action& action, const std::string& level, std::size_t index, const std::string& origin,
                        const std::string& slot, const SlotDef* decl, const std::vector<std::string>& chain,
                        bool store_result, Value& out) {
  const auto source = source_of(level, index);
  emit(TraceKind::RuleTried, origin, slot, source, {}, "query");
  const auto& q = *action.query;
  Value v;
  try {
    SessionContext ctx(*this, origin);
    auto key = evaluate(*q.key, ctx);
    v = query_value(q.table, q.column, q.key_column, q.op, key);
    if (v.is_unknown()) {
      emit(TraceKind::RuleSkipped, origin, slot, source, {}, "no matching rows");
      return false;
    }
    if (auto why = admissible(origin, slot, v, decl, chain)) {
      emit(TraceKind::RuleSkipped, origin, slot, source, v, *why);
      return false;
    }
  } catch (const Error& e) {
    if (e.code() == Errc::CascadeLimitExceeded) throw;
    emit(TraceKind::RuleSkipped, origin, slot, source, {}, e.what());
    return false;
  }
  emit(TraceKind::RuleFired, origin, slot, source, v, "query");
  if (store_result) store(origin, slot, v, true, source);
  out = v;
  return true;
}

void Session::store(const std::string& origin, const std::string& slot, const Value& value, bool fire,
                    const std::string& source) {
  const auto* old = memory_.find(origin, slot);
  const bool changed = !old || !(*old == value);
  memory_.set(origin, slot, value);
  emit(TraceKind::ValueAssigned, origin, slot, source, value);
  if (fire && changed) on_change(origin, slot);
}

void Session::on_change(const std::string& origin, const std::string& slot) {
  DepthGuard depth(cascade_depth_, env_->options.cascade_limit);
  const auto chain = ancestry(*this, origin, &memory_);
  const bool all = env_->resolvers.get(resolver_for(origin)).fire_all_on_change();
  for (const auto& level : chain) {
    ensure_rules(at(level));
    const auto& lf = at(level);
    if (lf.kind == FrameKind::RemoteStub) break;
    for (std::size_t i = 0; i < lf.actions.size(); ++i) {
      const auto& a = lf.actions[i];
      if (a.kind != ActionKind::ForwardRule || a.slot != slot) continue;
      // Copy: firing may replace the overlay frame that holds `a`.
      const Action action = a;
      if (fire_forward(action, level, i, origin) && !all) return;
    }
  }
}

bool Session::fire_forward(const Action& action, const std::string& level, std::size_t index,
                           const std::string& origin) {
  const auto source = source_of(level, index);
  emit(TraceKind::RuleTried, origin, action.slot, source);
  const auto& rule = *action.rule;
  std::vector<std::pair<std::string, Value>> values;
  try {
    SessionContext ctx(*this, origin);
    if (rule.condition) {
      auto c = evaluate(*rule.condition, ctx);
      if (!gate(c)) {
        emit(TraceKind::RuleSkipped, origin, action.slot, source, {},
             c.is_unknown() ? "condition unknown" : "condition false");
        return false;
      }
    }
    for (const auto& [target, expr] : rule.assignments) {
      auto v = evaluate(*expr, ctx);
      if (v.is_unknown()) {
        emit(TraceKind::RuleSkipped, origin, target, source, {}, "value unknown");
        return false;
      }
      auto chain = ancestry(*this, origin, &memory_);
      const auto* decl = declaration(chain, target);
      if (!decl && target != kParentSlot) {
        bool open = std::any_of(chain.begin(), chain.end(),
                                [&](const std::string& n) { return at(n).kind == FrameKind::RemoteStub; });
        if (!open) {
          throw Error(Errc::UnknownSlot, "slot '" + target + "' is not declared for frame '" + origin + "'",
                      {origin, target});
        }
      }
      if (auto why = admissible(origin, target, v, decl, chain)) {
        emit(TraceKind::RuleSkipped, origin, target, source, v, *why);
        return false;
      }
      values.emplace_back(target, std::move(v));
    }
  } catch (const Suspension&) {
    emit(TraceKind::RuleSkipped, origin, action.slot, source, {}, "condition needs an answer");
    return false;
  } catch (const Error& e) {
    if (e.code() == Errc::CascadeLimitExceeded) throw;
    emit(TraceKind::RuleSkipped, origin, action.slot, source, {}, e.what());
    return false;
  }
  emit(TraceKind::RuleFired, origin, action.slot, source);
  ++counters_.rules_fired;
  ++counters_.rules_fired_by_frame[level];
  for (const auto& [target, v] : values) store(origin, target, v, true, source);
  return true;
}

std::vector<std::string> Session::violations(const std::string& origin, const std::string& slot,
                                             const Value& candidate, const std::vector<std::string>& chain) {
  // Reads other slots from what is already known; Unknown operands pass.
  class Peek : public EvalContext {
  public:
    Peek(Session& s, const std::string& origin, const std::string& slot, const Value& candidate)
        : s_(s), origin_(origin), slot_(slot), candidate_(candidate) {}
    Value slot(const Expr& ref) override {
      if (ref.frame.empty() && ref.name == slot_) return candidate_;
      const auto& frame = ref.frame.empty() ? origin_ : ref.frame;
      return s_.callback_peek(frame, ref.name);
    }

  private:
    Session& s_;
    const std::string& origin_;
    const std::string& slot_;
    const Value& candidate_;
  };

  std::vector<std::string> out;
  Peek ctx(*this, origin, slot, candidate);
  for (const auto& level : chain) {
    const auto& f = at(level);
    if (f.kind == FrameKind::RemoteStub) {
      if (auto* backend = remote(); backend && !(proxy_ && origin == proxy_->frame())) {
        try {
          for (auto& v : backend->check_probe(f, origin == f.name ? std::string{} : origin, slot, candidate)) {
            out.push_back(std::move(v));
          }
        } catch (const Error& e) {
          emit(TraceKind::Warning, origin, slot, f.url, {}, std::string("remote constraints unchecked: ") + e.what());
        }
      }
      break;
    }
    for (const auto& c : f.constraints) {
      if (!mentions_slot(*c, slot)) continue;
      Value v;
      try {
        v = evaluate(*c, ctx);
      } catch (const Error&) {
        out.push_back(format(*c));
        continue;
      }
      if (v.kind() == ValueKind::Boolean && !v.as_boolean()) out.push_back(format(*c));
    }
  }
  return out;
}

std::vector<Value> Session::choices(const std::string&, const std::string& slot,
                                    const std::vector<std::string>& chain) {
  for (const auto& level : chain) {
    const auto& f = at(level);
    if (f.kind == FrameKind::RemoteStub) break;
    for (const auto& c : f.constraints) {
      if (auto list = choice_list(*c, slot)) return *list;
    }
  }
  return {};
}

Value Session::remote_slot(const FrameDef& stub, const std::string& slot, const std::string& origin) {
  const CacheKey key{stub.name, slot, origin};
  if (auto it = stub_cache_.find(key); it != stub_cache_.end()) {
    ++counters_.cache_hits;
    emit(TraceKind::CacheHit, origin.empty() ? stub.name : origin, slot, stub.url, it->second);
    if (env_->options.verify_cache) {
      if (auto* backend = remote()) {
        auto fresh = backend->get_slot(stub, slot, origin);
        if (fresh.outcome != Outcome::Resolved || !(fresh.value == it->second)) {
          throw Error(Errc::ProtocolViolation,
                      "cached " + stub.name + "." + slot + " = " + it->second.to_literal() +
                          " differs from a fresh query",
                      {stub.name, slot});
        }
      }
    }
    return it->second;
  }
  auto* backend = remote();
  const std::string who = origin.empty() ? stub.name : origin;
  if (!backend) {
    emit(TraceKind::Warning, who, slot, stub.url, {}, "no remote connector");
    return Value::unknown();
  }
  ++counters_.cache_misses;
  ++counters_.remote_calls;
  emit(TraceKind::RemoteCall, who, slot, stub.url);
  StepResult r;
  try {
    r = backend->get_slot(stub, slot, origin);
  } catch (const Error& e) {
    if (e.code() == Errc::CascadeLimitExceeded) throw;
    emit(TraceKind::Warning, who, slot, stub.url, {}, std::string("remote query failed: ") + e.what());
    return Value::unknown();
  }
  if (r.outcome == Outcome::Suspended && r.question) throw Suspension{*r.question};
  if (r.outcome != Outcome::Resolved) return Value::unknown();
  stub_cache_[key] = r.value;
  if (!origin.empty() && !(proxy_ && origin == proxy_->frame())) on_change(origin, slot);
  return r.value;
}

Value Session::call_extern(const Expr& call, const std::vector<Value>& args) {
  auto it = env_->externs.find(call.name);
  if (it == env_->externs.end()) {
    throw Error(Errc::EvalError, "unknown extern function '" + call.name + "'", {call.name});
  }
  if (static_cast<int>(args.size()) != it->second.first) {
    throw Error(Errc::EvalError, "function '" + call.name + "' takes " + std::to_string(it->second.first) +
                                     " arguments, got " + std::to_string(args.size()));
  }
  try {
    return it->second.second(args);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::EvalError, "function '" + call.name + "' failed: " + e.what(), {call.name});
  }
}

// ---- specification and search -----------------------------------------------------

SpecializeProbe Session::test_candidate(const std::string& origin, const FrameDef& candidate) {
  if (candidate.kind == FrameKind::RemoteStub) {
    auto* backend = remote();
    if (!backend) return SpecializeProbe::Open;
    try {
      return backend->specialize_probe(candidate, origin);
    } catch (const Error& e) {
      emit(TraceKind::Warning, origin, {}, candidate.url, {}, std::string("specialize probe failed: ") + e.what());
      return SpecializeProbe::Open;
    }
  }
  if (candidate.constraints.empty()) return SpecializeProbe::Open;
  bool known_true = false;
  for (const auto& c : candidate.constraints) {
    Value v;
    try {
      SessionContext ctx(*this, origin);
      v = evaluate(*c, ctx);
    } catch (const Error& e) {
      if (e.code() == Errc::CascadeLimitExceeded) throw;
      return SpecializeProbe::NoMatch;
    }
    if (v.is_unknown()) continue;
    if (v.kind() != ValueKind::Boolean || !v.as_boolean()) return SpecializeProbe::NoMatch;
    known_true = true;
  }
  return known_true ? SpecializeProbe::Match : SpecializeProbe::Open;
}

Value Session::specify_frame(const std::string& origin, const std::string& root) {
  at(root);
  std::string best;
  int best_depth = -1;
  std::function<void(const std::string&, int)> dfs = [&](const std::string& node, int depth) {
    for (const auto& child : children(node)) {
      if (child == origin) continue;
      const auto& cf = at(child);
      const auto r = test_candidate(origin, cf);
      if (r == SpecializeProbe::NoMatch) continue;
      if (r == SpecializeProbe::Match && depth > best_depth) {
        best = child;
        best_depth = depth;
      }
      dfs(child, depth + 1);
    }
  };
  dfs(root, 0);
  return best.empty() ? Value::unknown() : Value::reference(best);
}

Value Session::exists_with(const std::string& origin, const Expr& node,
                           const std::map<std::string, std::string>& bindings) {
  at(node.frame);
  const auto& condition = *node.args.at(0);
  std::optional<std::string> found;
  std::function<bool(const std::string&)> dfs = [&](const std::string& parent) {
    for (const auto& child : children(parent)) {
      auto scope = bindings;
      scope[node.name] = child;
      SessionContext ctx(*this, origin, std::move(scope));
      Value v;
      try {
        v = evaluate(condition, ctx);
      } catch (const Error& e) {
        if (e.code() == Errc::CascadeLimitExceeded) throw;
        v = Value::unknown();
      }
      if (v.kind() == ValueKind::Boolean && v.as_boolean()) {
        found = child;
        return true;
      }
      if (dfs(child)) return true;
    }
    return false;
  };
  dfs(node.frame);
  return found ? Value::reference(*found) : Value::unknown();
}

Value Session::eval_exists(const std::string& origin, const std::string& root, const std::string& var,
                           const ExprPtr& condition) {
  Expr node;
  node.op = ExprOp::Exists;
  node.name = var;
  node.frame = root;
  node.args = {condition};
  return exists_with(origin, node, {});
}

Value Session::eval_expr(const Expr& e, const std::string& origin) {
  SessionContext ctx(*this, origin);
  return evaluate(e, ctx);
}

// ---- tables --------------------------------------------------------------------

std::shared_ptr<const TableSource> Session::table_of(const std::string& frameset) const {
  const auto* fs = find(frameset);
  auto it = env_->tables.find(frameset);
  if (!fs || fs->kind != FrameKind::Frameset || it == env_->tables.end()) {
    throw Error(Errc::UnknownTable, "no table is bound to '" + frameset + "'", {frameset});
  }
  return it->second;
}

const std::vector<Value>& Session::cached_row(const std::string& frameset, const TableSource& table,
                                              const std::string& key) {
  auto k = std::make_pair(frameset, key);
  auto it = rows_.find(k);
  if (it == rows_.end()) {
    auto row = table.row(key);
    ++counters_.rows_read;
    it = rows_.emplace(k, row ? *row : std::vector<Value>{}).first;
  }
  return it->second;
}

Value Session::query_value(const std::string& frameset, const std::string& column, const std::string& key_column,
                           ExprOp op, const Value& key) {
  auto table = table_of(frameset);
  return query_table(*table, column, key_column, op, key,
                     [&](const std::string& k) { return cached_row(frameset, *table, k); });
}

std::string Session::generate_frame(const std::string& frameset, const std::string& column, const Value& value,
                                    const std::string& frame_name) {
  auto table = table_of(frameset);
  auto col = table->column_index(column);
  if (!col) throw Error(Errc::UnknownColumn, "table has no column '" + column + "'", {column});
  if (!is_identifier(frame_name)) {
    throw Error(Errc::InvalidIdentifier, "'" + frame_name + "' is not a valid frame name", {frame_name});
  }
  if (find(frame_name)) {
    throw Error(Errc::AmbiguousFrameName, "frame '" + frame_name + "' already exists", {frame_name});
  }
  const auto& fs = at(frameset);
  for (const auto& key : table->keys()) {
    const auto& row = cached_row(frameset, *table, key);
    if (row.size() <= *col || !(row[*col] == value)) continue;
    FrameDef f;
    f.name = frame_name;
    f.parent = fs.parent;
    for (std::size_t i = 0; i < table->columns().size(); ++i) {
      SlotDef s{table->columns()[i], table->column_types()[i], std::nullopt};
      if (row[i].is_known()) s.default_value = row[i];
      f.slots.push_back(std::move(s));
    }
    overlay_[frame_name] = std::move(f);
    overlay_order_.push_back(frame_name);
    return frame_name;
  }
  throw Error(Errc::NoMatchingRow, "no row of '" + frameset + "' has " + column + " = " + value.to_literal(),
              {frameset, column, value.to_literal()});
}

void Session::attach_action(const std::string& frame, Action action) {
  auto it = overlay_.find(frame);
  if (it == overlay_.end() || env_->world->find(frame)) {
    throw Error(Errc::UnknownFrame, "'" + frame + "' is not a frame generated in this session", {frame});
  }
  if (action.kind != ActionKind::ForwardRule && !it->second.declares(action.slot) && action.slot != kParentSlot) {
    bool visible = false;
    try {
      slot_lookup(*this, frame, action.slot, &memory_);
      visible = true;
    } catch (const Error&) {
    }
    if (!visible) {
      throw Error(Errc::UnknownSlot, "slot '" + action.slot + "' is not declared for frame '" + frame + "'",
                  {frame, action.slot});
    }
  }
  it->second.actions.push_back(std::move(action));
}

// ---- public operations ------------------------------------------------------------

StepResult Session::run_goal() {
  const auto [frame, slot] = *goal_;
  try {
    auto v = need(frame, slot);
    pending_.reset();
    return {v.is_known() ? Outcome::Resolved : Outcome::Unknown, v, std::nullopt};
  } catch (Suspension& s) {
    stack_.clear();
    cascade_depth_ = 0;
    auto q = std::move(s.question);
    if (pending_ && pending_->frame == q.frame && pending_->slot == q.slot) {
      q.id = pending_->id;
      if (q.violations.empty()) q.violations = pending_->violations;
    } else if (q.id.empty()) {
      q.id = "q" + std::to_string(next_question_++);
      ++counters_.questions_asked;
    }
    pending_ = q;
    emit(TraceKind::QuestionEmitted, q.frame, q.slot, {}, Value::string(q.prompt), q.id);
    return {Outcome::Suspended, {}, q};
  } catch (...) {
    stack_.clear();
    cascade_depth_ = 0;
    throw;
  }
}

StepResult Session::infer(const std::string& frame, const std::string& slot) {
  at(frame);
  if (!is_identifier(slot)) throw Error(Errc::UnknownSlot, "'" + slot + "' is not a slot name", {frame, slot});
  if (pending_ && goal_ && (goal_->first != frame || goal_->second != slot)) pending_.reset();
  goal_ = {frame, slot};
  return run_goal();
}

StepResult Session::answer(const std::string& question_id, const Value& value) {
  if (!pending_ || pending_->id != question_id) {
    throw Error(Errc::NoPendingQuestion, "no pending question '" + question_id + "'", {question_id});
  }
  const Question q = *pending_;
  Value v = value;
  if (q.type.kind != ValueKind::Unknown) v = conform(q.type, v);
  if (v.is_unknown() || (q.type.kind != ValueKind::Unknown && !admits(q.type, v))) {
    throw Error(Errc::AnswerTypeMismatch,
                "answer " + value.to_literal() + " does not fit " +
                    (q.type.kind == ValueKind::Unknown ? std::string("the question") : q.type.name()),
                {q.id, q.type.name()});
  }
  const auto& f = at(q.frame);
  if (f.kind == FrameKind::RemoteStub) {
    auto* backend = remote();
    if (!backend) throw Error(Errc::ConnectError, "no remote connector for '" + q.frame + "'", {q.frame});
    try {
      backend->answer(f, q.frame, q.slot, v);
    } catch (const Error& e) {
      if (e.code() == Errc::ConstraintViolation) {
        pending_->violations = e.details();
        std::string text;
        for (const auto& b : e.details()) text += (text.empty() ? "" : "; ") + b;
        emit(TraceKind::Warning, q.frame, q.slot, {}, v, "answer rejected: violates " + text);
      }
      throw;
    }
    emit(TraceKind::AnswerReceived, q.frame, q.slot, {}, v, q.id);
  } else {
    const auto chain = ancestry(*this, q.frame, &memory_);
    if (auto bad = violations(q.frame, q.slot, v, chain); !bad.empty()) {
      pending_->violations = bad;
      std::string text;
      for (const auto& b : bad) text += (text.empty() ? "" : "; ") + b;
      emit(TraceKind::Warning, q.frame, q.slot, {}, v, "answer rejected: violates " + text);
      throw Error(Errc::ConstraintViolation, "answer " + v.to_literal() + " violates " + text, bad);
    }
    emit(TraceKind::AnswerReceived, q.frame, q.slot, {}, v, q.id);
    try {
      store(q.frame, q.slot, v, true, "answer");
    } catch (...) {
      cascade_depth_ = 0;
      throw;
    }
  }
  pending_.reset();
  if (!goal_) return {Outcome::Resolved, v, std::nullopt};
  return run_goal();
}

void Session::assign(const std::string& frame, const std::string& slot, const Value& value) {
  const auto& f = at(frame);
  if (f.kind == FrameKind::FramesetMember && f.declares(slot)) {
    throw Error(Errc::ReadOnlySlot, "frameset member slot '" + frame + "." + slot + "' is read-only",
                {frame, slot});
  }
  const auto chain = ancestry(*this, frame, &memory_);
  const auto* decl = declaration(chain, slot);
  if (!decl) {
    bool open = std::any_of(chain.begin(), chain.end(),
                            [&](const std::string& n) { return at(n).kind == FrameKind::RemoteStub; });
    if (!open) {
      throw Error(Errc::UnknownSlot, "slot '" + slot + "' is not declared for frame '" + frame + "'", {frame, slot});
    }
  }
  Value v = decl ? conform(decl->type, value) : value;
  if (v.is_unknown() || (decl && !admits(decl->type, v))) {
    throw Error(Errc::TypeMismatch,
                "value " + value.to_literal() + " does not fit " + (decl ? decl->type.name() : std::string("slot")),
                {frame, slot});
  }
  if (slot == kParentSlot) {
    WorkingMemory probe = memory_;
    probe.set(frame, slot, v);
    ancestry(*this, frame, &probe);
  }
  if (auto bad = violations(frame, slot, v, chain); !bad.empty()) {
    std::string text;
    for (const auto& b : bad) text += (text.empty() ? "" : "; ") + b;
    throw Error(Errc::ConstraintViolation, frame + "." + slot + " = " + v.to_literal() + " violates " + text, bad);
  }
  try {
    store(frame, slot, v, true, "assign");
  } catch (...) {
    cascade_depth_ = 0;
    throw;
  }
}

// ---- serving -----------------------------------------------------------------------

StepResult Session::serve_slot(const std::string& level, const std::string& slot, OriginProxy& origin) {
  ProxyScope scope(proxy_, &origin);
  const auto& who = origin.frame();
  at(level);
  try {
    if (on_stack(who, slot)) return {Outcome::Unknown, {}, std::nullopt};
    GoalGuard guard(*this, who, slot);
    auto v = walk(who, slot, level, false);
    return {v.is_known() ? Outcome::Resolved : Outcome::Unknown, v, std::nullopt};
  } catch (Suspension& s) {
    return {Outcome::Suspended, {}, std::move(s.question)};
  }
}

SpecializeProbe Session::serve_specialize_probe(const std::string& candidate, OriginProxy& origin) {
  ProxyScope scope(proxy_, &origin);
  return test_candidate(origin.frame(), at(candidate));
}

std::vector<std::string> Session::serve_check_probe(const std::string& level, const std::string& slot,
                                                    const Value& candidate, OriginProxy& origin) {
  ProxyScope scope(proxy_, &origin);
  const auto chain = ancestry(*this, level, &memory_);
  return violations(origin.frame(), slot, candidate, chain);
}

StepResult Session::serve_self(const std::string& frame, const std::string& slot) {
  try {
    auto v = need(frame, slot);
    return {v.is_known() ? Outcome::Resolved : Outcome::Unknown, v, std::nullopt};
  } catch (Suspension& s) {
    stack_.clear();
    return {Outcome::Suspended, {}, std::move(s.question)};
  }
}

void Session::serve_answer(const std::string& frame, const std::string& slot, const Value& value) {
  assign(frame, slot, value);
}

Value Session::callback_read(const std::string& origin, const std::string& slot) {
  if (proxy_ && origin == proxy_->frame()) return proxy_->read(slot);
  return need(origin, slot);
}

Value Session::callback_peek(const std::string& origin, const std::string& slot) const {
  if (proxy_ && origin == proxy_->frame()) return proxy_->peek(slot);
  if (const auto* v = memory_.find(origin, slot)) return *v;
  return Value::unknown();
}

}  // namespace fkb
