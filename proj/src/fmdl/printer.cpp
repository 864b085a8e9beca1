// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include "fkb/error.hpp"
#include "fkb/fmdl.hpp"

namespace fkb::fmdl {

namespace {

std::string quoted(const std::string& s) { return Value::string(s).to_literal(); }

std::string header(const FrameDef& f) {
  std::string out = f.name;
  if (f.parent) out += " : " + *f.parent;
  return out;
}

void print_action(const Action& a, std::string& out) {
  switch (a.kind) {
    case ActionKind::BackwardRule: {
      const auto& r = *a.rule;
      out += "  " + a.slot + " := " + format(*r.assignments.front().second);
      if (r.condition) out += " if " + format(*r.condition);
      out += ";\n";
      return;
    }
    case ActionKind::ForwardRule: {
      const auto& r = *a.rule;
      out += "  on " + a.slot;
      if (r.condition) out += " if " + format(*r.condition);
      out += " {\n";
      for (const auto& [slot, e] : r.assignments) out += "    " + slot + " := " + format(*e) + ";\n";
      out += "  }\n";
      return;
    }
    case ActionKind::AskUser: out += "  ask " + a.slot + ": " + quoted(a.prompt) + ";\n"; return;
    case ActionKind::QueryValue: {
      const auto& q = *a.query;
      out += "  query " + a.slot + " from " + q.table + "." + q.column + " where " + q.key_column + " " +
             std::string(op_symbol(q.op)) + " " + format(*q.key) + ";\n";
      return;
    }
  }
}

}  // namespace

std::string pretty_print(const WorldBuild& build) {
  std::string out;
  for (const auto& [name, arity] : build.externs()) {
    out += "extern function " + name + "/" + std::to_string(arity) + ";\n";
  }
  for (const auto& f : build.frames()) {
    if (!out.empty()) out += "\n";
    switch (f.kind) {
      case FrameKind::RemoteStub:
        out += "remote frame " + header(f) + " at " + quoted(f.url) + ";\n";
        continue;
      case FrameKind::Frameset:
        out += "frameset " + f.name + " from table " + quoted(f.table) + " key " + f.key;
        if (f.parent) out += " parent " + *f.parent;
        out += ";\n";
        continue;
      case FrameKind::ExternalObject:
        out += "external ";
        break;
      default: break;
    }
    out += "frame " + header(f) + " {\n";
    for (const auto& s : f.slots) {
      out += "  slot " + s.name + ": " + s.type.name();
      if (s.default_value) out += " default " + s.default_value->to_literal();
      out += ";\n";
    }
    for (const auto& c : f.constraints) out += "  constraint " + format(*c) + ";\n";
    if (f.rules_from) out += "  rules from " + quoted(*f.rules_from) + ";\n";
    for (const auto& a : f.actions) print_action(a, out);
    out += "}\n";
  }
  return out;
}

std::shared_ptr<const FrameWorld> load_source(std::string_view text, const std::string& file,
                                              const std::filesystem::path& base_dir) {
  auto parsed = parse(text, file);
  auto diagnostics = parsed.diagnostics;
  if (parsed.world) {
    auto more = validate(*parsed.world, &parsed.sources);
    diagnostics.insert(diagnostics.end(), more.begin(), more.end());
  }
  if (!parsed.world || has_errors(diagnostics)) {
    std::vector<std::string> lines;
    for (const auto& d : diagnostics) {
      if (d.severity == Severity::Error) lines.push_back(d.to_string());
    }
    throw Error(Errc::Syntax, lines.empty() ? "invalid knowledge source" : lines.front(), lines);
  }
  parsed.world->base_dir = base_dir;
  return FrameWorld::freeze(std::move(*parsed.world));
}

std::shared_ptr<const FrameWorld> load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read '" + path.string() + "'", {path.string()});
  std::ostringstream text;
  text << in.rdbuf();
  return load_source(text.str(), path.string(), path.parent_path());
}

}  // namespace fkb::fmdl
