// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <map>

#include "fkb/error.hpp"
#include "fkb/interchange.hpp"

namespace fkb::interchange {

namespace {

using xml::Element;

[[noreturn]] void schema_error(const std::string& path, const std::string& reason) {
  throw Error(Errc::SchemaError, "schema error at " + path + ": " + reason, {path, reason});
}

std::string child_path(const std::string& path, const Element& parent, std::size_t index) {
  const auto& name = parent.children[index].name;
  std::size_t n = 0;
  for (std::size_t i = 0; i <= index; ++i) {
    if (parent.children[i].name == name) ++n;
  }
  return path + "/" + name + "[" + std::to_string(n) + "]";
}

const std::string& required(const Element& e, std::string_view key, const std::string& path) {
  if (const auto* v = e.attr(key)) return *v;
  schema_error(path, "missing attribute '" + std::string(key) + "'");
}

void allow_attributes(const Element& e, std::initializer_list<std::string_view> keys, const std::string& path) {
  for (const auto& [k, v] : e.attributes) {
    bool ok = false;
    for (auto key : keys) ok = ok || k == key;
    if (!ok) schema_error(path, "unexpected attribute '" + k + "'");
  }
}

void no_children(const Element& e, const std::string& path) {
  if (!e.children.empty()) schema_error(path + "/" + e.children.front().name, "unexpected element");
}

std::string identifier(const Element& e, std::string_view key, const std::string& path) {
  const auto& v = required(e, key, path);
  if (!is_identifier(v)) schema_error(path, "attribute '" + std::string(key) + "' is not an identifier");
  return v;
}

const std::map<ExprOp, std::string_view>& op_names() {
  static const std::map<ExprOp, std::string_view> names{
      {ExprOp::Not, "not"}, {ExprOp::Neg, "neg"}, {ExprOp::And, "and"}, {ExprOp::Or, "or"},
      {ExprOp::Eq, "eq"},   {ExprOp::Ne, "ne"},   {ExprOp::Lt, "lt"},   {ExprOp::Le, "le"},
      {ExprOp::Gt, "gt"},   {ExprOp::Ge, "ge"},   {ExprOp::Add, "add"}, {ExprOp::Sub, "sub"},
      {ExprOp::Mul, "mul"}, {ExprOp::Div, "div"}, {ExprOp::In, "in"},
  };
  return names;
}

std::optional<ExprOp> op_from_name(std::string_view name) {
  for (const auto& [op, n] : op_names()) {
    if (n == name) return op;
  }
  return std::nullopt;
}

std::string type_name(ValueKind k) { return std::string(to_string(k)); }

SlotType slot_type_from(const Element& e, const std::string& path) {
  const auto& type = required(e, "type", path);
  auto kind = value_kind_from_string(type);
  if (!kind || *kind == ValueKind::Unknown) schema_error(path, "unknown type '" + type + "'");
  if (*kind != ValueKind::List) {
    if (e.attr("elem")) schema_error(path, "'elem' is only valid for list slots");
    return {*kind};
  }
  const auto& elem = required(e, "elem", path);
  auto ek = value_kind_from_string(elem);
  if (!ek || !is_scalar(*ek) || *ek == ValueKind::Reference) {
    schema_error(path, "invalid list element type '" + elem + "'");
  }
  return SlotType::list_of(*ek);
}

Element rule_to_xml(const Rule& r) {
  Element e("rule");
  e.set("slot", r.target_slot);
  e.set("kind", r.direction == Direction::Backward ? "backward" : "forward");
  if (r.condition) e.add("when").add(expr_to_xml(*r.condition));
  for (const auto& [slot, value] : r.assignments) {
    auto& s = e.add("set");
    s.set("slot", slot);
    s.add(expr_to_xml(*value));
  }
  return e;
}

ExprPtr single_expr(const Element& e, const std::string& path) {
  if (e.children.size() != 1) schema_error(path, "expected exactly one expression");
  return expr_from_xml(e.children[0], child_path(path, e, 0));
}

Action rule_from_xml(const Element& e, const std::string& path) {
  allow_attributes(e, {"slot", "kind"}, path);
  Rule r;
  r.target_slot = identifier(e, "slot", path);
  const auto& kind = required(e, "kind", path);
  if (kind != "backward" && kind != "forward") schema_error(path, "rule kind must be backward or forward");
  for (std::size_t i = 0; i < e.children.size(); ++i) {
    const auto& c = e.children[i];
    const auto p = child_path(path, e, i);
    if (c.name == "when") {
      if (r.condition || !r.assignments.empty()) schema_error(p, "'when' must come first, once");
      allow_attributes(c, {}, p);
      r.condition = single_expr(c, p);
    } else if (c.name == "set") {
      allow_attributes(c, {"slot"}, p);
      r.assignments.emplace_back(identifier(c, "slot", p), single_expr(c, p));
    } else {
      schema_error(path + "/" + c.name, "unexpected element");
    }
  }
  if (r.assignments.empty()) schema_error(path, "rule has no 'set'");
  if (kind == "backward") {
    if (r.assignments.size() != 1 || r.assignments[0].first != r.target_slot) {
      schema_error(path, "a backward rule sets exactly its own slot");
    }
    return Action::backward(std::move(r));
  }
  return Action::forward(std::move(r));
}

}  // namespace

// ---- values and expressions ------------------------------------------------

Element value_to_xml(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Integer: {
      Element e("int");
      e.text = std::to_string(v.as_integer());
      return e;
    }
    case ValueKind::Boolean: {
      Element e("bool");
      e.text = v.as_boolean() ? "true" : "false";
      return e;
    }
    case ValueKind::String: {
      Element e("str");
      e.text = v.as_string();
      return e;
    }
    case ValueKind::Reference: {
      Element e("ref");
      e.text = v.as_reference();
      return e;
    }
    case ValueKind::List: {
      Element e("list");
      e.set("elem", type_name(v.element_kind()));
      for (const auto& item : v.items()) e.add(value_to_xml(item));
      return e;
    }
    case ValueKind::Unknown: break;
  }
  return Element("unknown");
}

Value value_from_xml(const Element& e, const std::string& path) {
  if (e.name == "int") {
    allow_attributes(e, {}, path);
    std::int64_t n = 0;
    auto [ptr, ec] = std::from_chars(e.text.data(), e.text.data() + e.text.size(), n);
    if (ec != std::errc{} || ptr != e.text.data() + e.text.size() || e.text.empty()) {
      schema_error(path, "invalid integer '" + e.text + "'");
    }
    return Value::integer(n);
  }
  if (e.name == "bool") {
    allow_attributes(e, {}, path);
    if (e.text == "true") return Value::boolean(true);
    if (e.text == "false") return Value::boolean(false);
    schema_error(path, "invalid boolean '" + e.text + "'");
  }
  if (e.name == "str") {
    allow_attributes(e, {}, path);
    no_children(e, path);
    return Value::string(e.text);
  }
  if (e.name == "ref") {
    allow_attributes(e, {}, path);
    if (!is_identifier(e.text)) schema_error(path, "invalid frame reference '" + e.text + "'");
    return Value::reference(e.text);
  }
  if (e.name == "unknown") {
    allow_attributes(e, {}, path);
    no_children(e, path);
    return Value::unknown();
  }
  if (e.name == "list") {
    allow_attributes(e, {"elem"}, path);
    const auto& elem = required(e, "elem", path);
    auto kind = value_kind_from_string(elem);
    if (!kind || (*kind != ValueKind::Unknown && !is_scalar(*kind))) {
      schema_error(path, "invalid list element type '" + elem + "'");
    }
    std::vector<Value> items;
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      items.push_back(value_from_xml(e.children[i], child_path(path, e, i)));
    }
    try {
      return Value::list(*kind, std::move(items));
    } catch (const Error& err) {
      schema_error(path, err.what());
    }
  }
  schema_error(path, "expected a value element, found '" + e.name + "'");
}

Element expr_to_xml(const Expr& e) {
  switch (e.op) {
    case ExprOp::Literal: return value_to_xml(e.literal);
    case ExprOp::SlotRef: {
      Element x("slotref");
      x.set("name", e.name);
      if (!e.frame.empty()) x.set("frame", e.frame);
      return x;
    }
    case ExprOp::ListLit: {
      Element x("list");
      for (const auto& a : e.args) x.add(expr_to_xml(*a));
      return x;
    }
    case ExprOp::Call: {
      Element x("call");
      x.set("name", e.name);
      for (const auto& a : e.args) x.add(expr_to_xml(*a));
      return x;
    }
    case ExprOp::Exists: {
      Element x("exists");
      x.set("var", e.name);
      x.set("root", e.frame);
      x.add(expr_to_xml(*e.args[0]));
      return x;
    }
    case ExprOp::Specialize: {
      Element x("specialize");
      x.set("root", e.frame);
      return x;
    }
    default: {
      Element x(std::string(op_names().at(e.op)));
      for (const auto& a : e.args) x.add(expr_to_xml(*a));
      return x;
    }
  }
}

ExprPtr expr_from_xml(const Element& e, const std::string& path) {
  auto args = [&](std::size_t expected) {
    if (e.children.size() != expected) {
      schema_error(path, "'" + e.name + "' takes " + std::to_string(expected) + " operand(s)");
    }
    std::vector<ExprPtr> out;
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      out.push_back(expr_from_xml(e.children[i], child_path(path, e, i)));
    }
    return out;
  };
  if (e.name == "list" && !e.attr("elem")) {
    allow_attributes(e, {}, path);
    return expr::list(args(e.children.size()));
  }
  if (e.name == "int" || e.name == "bool" || e.name == "str" || e.name == "ref" || e.name == "unknown" ||
      e.name == "list") {
    return expr::lit(value_from_xml(e, path));
  }
  if (e.name == "slotref") {
    allow_attributes(e, {"name", "frame"}, path);
    no_children(e, path);
    std::string qualifier;
    if (e.attr("frame")) qualifier = identifier(e, "frame", path);
    return expr::slot(identifier(e, "name", path), qualifier);
  }
  if (e.name == "call") {
    allow_attributes(e, {"name"}, path);
    auto name = identifier(e, "name", path);
    return expr::call(std::move(name), args(e.children.size()));
  }
  if (e.name == "exists") {
    allow_attributes(e, {"var", "root"}, path);
    auto var = identifier(e, "var", path);
    auto root = identifier(e, "root", path);
    return expr::exists(std::move(var), std::move(root), args(1)[0]);
  }
  if (e.name == "specialize") {
    allow_attributes(e, {"root"}, path);
    no_children(e, path);
    return expr::specialize(identifier(e, "root", path));
  }
  if (auto op = op_from_name(e.name)) {
    allow_attributes(e, {}, path);
    if (is_unary(*op)) return expr::unary(*op, args(1)[0]);
    auto xs = args(2);
    return expr::binary(*op, xs[0], xs[1]);
  }
  schema_error(path, "unexpected element '" + e.name + "'");
}

// ---- frames and worlds -----------------------------------------------------

Element frame_to_xml(const FrameDef& f) {
  Element e("frame");
  e.set("name", f.name);
  if (f.parent) e.set("parent", *f.parent);
  if (f.kind != FrameKind::Local) e.set("kind", std::string(to_string(f.kind)));
  if (!f.url.empty()) e.set("url", f.url);
  if (!f.table.empty()) e.set("table", f.table);
  if (!f.key.empty()) e.set("key", f.key);
  for (const auto& s : f.slots) {
    auto& x = e.add("slot");
    x.set("name", s.name);
    x.set("type", type_name(s.type.kind));
    if (s.type.kind == ValueKind::List) x.set("elem", type_name(s.type.element));
    if (s.default_value) x.add("default").add(value_to_xml(*s.default_value));
  }
  for (const auto& c : f.constraints) e.add("constraint").add(expr_to_xml(*c));
  if (f.rules_from) e.add("rulesfrom").set("url", *f.rules_from);
  for (const auto& a : f.actions) {
    switch (a.kind) {
      case ActionKind::BackwardRule:
      case ActionKind::ForwardRule: e.add(rule_to_xml(*a.rule)); break;
      case ActionKind::AskUser: {
        auto& x = e.add("ask");
        x.set("slot", a.slot);
        x.set("prompt", a.prompt);
        break;
      }
      case ActionKind::QueryValue: {
        const auto& q = *a.query;
        auto& x = e.add("query");
        x.set("slot", a.slot);
        x.set("table", q.table);
        x.set("column", q.column);
        x.set("key", q.key_column);
        x.set("op", std::string(op_names().at(q.op)));
        x.add(expr_to_xml(*q.key));
        break;
      }
    }
  }
  return e;
}

FrameDef frame_from_xml(const Element& e, const std::string& path) {
  allow_attributes(e, {"name", "parent", "kind", "url", "table", "key"}, path);
  FrameDef f;
  f.name = identifier(e, "name", path);
  if (e.attr("parent")) f.parent = identifier(e, "parent", path);
  if (const auto* kind = e.attr("kind")) {
    if (*kind == "remote") {
      f.kind = FrameKind::RemoteStub;
    } else if (*kind == "frameset") {
      f.kind = FrameKind::Frameset;
    } else if (*kind == "external") {
      f.kind = FrameKind::ExternalObject;
    } else if (*kind == "local") {
      f.kind = FrameKind::Local;
    } else {
      schema_error(path, "unknown frame kind '" + *kind + "'");
    }
  }
  if (const auto* v = e.attr("url")) f.url = *v;
  if (const auto* v = e.attr("table")) f.table = *v;
  if (const auto* v = e.attr("key")) f.key = *v;
  if (f.kind == FrameKind::RemoteStub && f.url.empty()) schema_error(path, "remote frame without url");
  if (f.kind == FrameKind::Frameset && (f.table.empty() || f.key.empty())) {
    schema_error(path, "frameset needs table and key");
  }
  for (std::size_t i = 0; i < e.children.size(); ++i) {
    const auto& c = e.children[i];
    const auto p = child_path(path, e, i);
    if (c.name == "slot") {
      allow_attributes(c, {"name", "type", "elem"}, p);
      SlotDef s;
      s.name = identifier(c, "name", p);
      s.type = slot_type_from(c, p);
      for (std::size_t j = 0; j < c.children.size(); ++j) {
        const auto& d = c.children[j];
        const auto dp = child_path(p, c, j);
        if (d.name != "default" || s.default_value) schema_error(p + "/" + d.name, "unexpected element");
        allow_attributes(d, {}, dp);
        if (d.children.size() != 1) schema_error(dp, "expected exactly one value");
        s.default_value = conform(s.type, value_from_xml(d.children[0], child_path(dp, d, 0)));
      }
      f.slots.push_back(std::move(s));
    } else if (c.name == "constraint") {
      allow_attributes(c, {}, p);
      f.constraints.push_back(single_expr(c, p));
    } else if (c.name == "rulesfrom") {
      allow_attributes(c, {"url"}, p);
      no_children(c, p);
      f.rules_from = required(c, "url", p);
    } else if (c.name == "rule") {
      f.actions.push_back(rule_from_xml(c, p));
    } else if (c.name == "ask") {
      allow_attributes(c, {"slot", "prompt"}, p);
      no_children(c, p);
      f.actions.push_back(Action::ask(identifier(c, "slot", p), required(c, "prompt", p)));
    } else if (c.name == "query") {
      allow_attributes(c, {"slot", "table", "column", "key", "op"}, p);
      QuerySpec q;
      q.table = identifier(c, "table", p);
      q.column = identifier(c, "column", p);
      q.key_column = identifier(c, "key", p);
      auto op = op_from_name(required(c, "op", p));
      if (!op || !(is_comparison(*op) || *op == ExprOp::In)) schema_error(p, "invalid query operator");
      q.op = *op;
      q.key = single_expr(c, p);
      f.actions.push_back(Action::query_value(identifier(c, "slot", p), std::move(q)));
    } else {
      schema_error(path + "/" + c.name, "unexpected element");
    }
  }
  return f;
}

Element world_to_element(const WorldBuild& build) {
  Element root("frameworld");
  root.set("version", std::string(kFormatVersion));
  for (const auto& [name, arity] : build.externs()) {
    auto& x = root.add("extern");
    x.set("name", name);
    x.set("arity", std::to_string(arity));
  }
  for (const auto& f : build.frames()) root.add(frame_to_xml(f));
  return root;
}

WorldBuild world_from_element(const Element& root) {
  const std::string path = "/" + root.name;
  if (root.name != "frameworld") schema_error(path, "expected root element 'frameworld'");
  allow_attributes(root, {"version"}, path);
  const auto& version = required(root, "version", path);
  if (version != kFormatVersion) {
    throw Error(Errc::VersionUnsupported, "unsupported format version '" + version + "'", {version});
  }
  WorldBuild build;
  for (std::size_t i = 0; i < root.children.size(); ++i) {
    const auto& c = root.children[i];
    const auto p = child_path(path, root, i);
    if (c.name == "extern") {
      allow_attributes(c, {"name", "arity"}, p);
      no_children(c, p);
      const auto& text = required(c, "arity", p);
      int arity = -1;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), arity);
      if (ec != std::errc{} || ptr != text.data() + text.size() || arity < 0) schema_error(p, "invalid arity");
      build.add_extern(identifier(c, "name", p), arity);
    } else if (c.name == "frame") {
      try {
        build.add_frame(frame_from_xml(c, p));
      } catch (const Error& err) {
        if (err.code() == Errc::SchemaError) throw;
        schema_error(p, err.what());
      }
    } else {
      schema_error(path + "/" + c.name, "unexpected element");
    }
  }
  return build;
}

std::string world_to_xml(const WorldBuild& build) { return xml::write(world_to_element(build)); }

std::string world_to_xml(const FrameWorld& world) { return world_to_xml(world.thaw()); }

WorldBuild world_from_xml(std::string_view text) { return world_from_element(xml::parse(text)); }

std::shared_ptr<const FrameWorld> load_world_xml(std::string_view text, const std::filesystem::path& base_dir) {
  auto build = world_from_xml(text);
  build.base_dir = base_dir;
  return FrameWorld::freeze(std::move(build));
}

// ---- remote rules ----------------------------------------------------------

Element rules_to_xml(const FrameDef& frame) {
  Element e("rules");
  e.set("frame", frame.name);
  for (const auto& a : frame.actions) {
    if (a.rule) e.add(rule_to_xml(*a.rule));
  }
  return e;
}

std::optional<SlotType> infer_slot_type(const Expr& e) {
  switch (e.op) {
    case ExprOp::Literal: {
      const auto& v = e.literal;
      if (v.is_unknown()) return std::nullopt;
      if (v.kind() == ValueKind::List) {
        if (v.element_kind() == ValueKind::Unknown) return std::nullopt;
        return SlotType::list_of(v.element_kind());
      }
      return SlotType{v.kind()};
    }
    case ExprOp::Not:
    case ExprOp::And:
    case ExprOp::Or:
    case ExprOp::Eq:
    case ExprOp::Ne:
    case ExprOp::Lt:
    case ExprOp::Le:
    case ExprOp::Gt:
    case ExprOp::Ge:
    case ExprOp::In: return SlotType{ValueKind::Boolean};
    case ExprOp::Neg:
    case ExprOp::Add:
    case ExprOp::Sub:
    case ExprOp::Mul:
    case ExprOp::Div: return SlotType{ValueKind::Integer};
    case ExprOp::Exists:
    case ExprOp::Specialize: return SlotType{ValueKind::Reference};
    case ExprOp::ListLit: {
      if (e.args.empty()) return std::nullopt;
      auto first = infer_slot_type(*e.args[0]);
      if (!first || !is_scalar(first->kind) || first->kind == ValueKind::Reference) return std::nullopt;
      return SlotType::list_of(first->kind);
    }
    case ExprOp::SlotRef:
    case ExprOp::Call: return std::nullopt;
  }
  return std::nullopt;
}

void merge_rules(FrameDef& target, const Element& rules, const FrameSource* world) {
  const std::string path = "/" + rules.name;
  if (rules.name != "rules") schema_error(path, "expected root element 'rules'");
  allow_attributes(rules, {"frame"}, path);
  auto visible = [&](const std::string& slot) {
    if (slot == kParentSlot || target.declares(slot)) return true;
    if (!world || !target.parent) return false;
    try {
      slot_lookup(*world, *target.parent, slot);
      return true;
    } catch (const Error&) {
      return false;
    }
  };
  std::vector<Action> incoming;
  for (std::size_t i = 0; i < rules.children.size(); ++i) {
    const auto& c = rules.children[i];
    if (c.name != "rule") schema_error(path + "/" + c.name, "unexpected element");
    incoming.push_back(rule_from_xml(c, child_path(path, rules, i)));
  }
  for (auto& a : incoming) {
    if (a.kind == ActionKind::ForwardRule && !visible(a.slot)) {
      throw Error(Errc::UntypedRemoteSlot,
                  "remote rule listens on undeclared slot '" + a.slot + "' of '" + target.name + "'",
                  {target.name, a.slot});
    }
    for (const auto& [slot, value] : a.rule->assignments) {
      if (visible(slot)) continue;
      auto type = infer_slot_type(*value);
      if (!type) {
        throw Error(Errc::UntypedRemoteSlot,
                    "cannot decide the type of remote slot '" + target.name + "." + slot + "' from '" +
                        format(*value) + "'",
                    {target.name, slot});
      }
      target.slots.push_back({slot, *type, std::nullopt});
    }
    target.actions.push_back(std::move(a));
  }
}

WorldBuild merge_rules(const FrameWorld& world, const Element& rules, const std::string& target_frame) {
  auto build = world.thaw();
  auto* target = build.find(target_frame);
  if (!target) {
    throw Error(Errc::UnknownFrame, "unknown frame '" + target_frame + "'", {target_frame});
  }
  merge_rules(*target, rules, &world);
  return build;
}

}  // namespace fkb::interchange
