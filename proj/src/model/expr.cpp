// SPDX-License-Identifier: Apache-2.0
#include "fkb/expr.hpp"

namespace fkb {

namespace expr {

ExprPtr lit(Value v) {
  auto e = std::make_shared<Expr>();
  e->op = ExprOp::Literal;
  e->literal = std::move(v);
  return e;
}

ExprPtr slot(std::string name, std::string qualifier) {
  auto e = std::make_shared<Expr>();
  e->op = ExprOp::SlotRef;
  e->name = std::move(name);
  e->frame = std::move(qualifier);
  return e;
}

ExprPtr unary(ExprOp op, ExprPtr operand) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->args.push_back(std::move(operand));
  return e;
}

ExprPtr binary(ExprOp op, ExprPtr lhs, ExprPtr rhs) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->args.push_back(std::move(lhs));
  e->args.push_back(std::move(rhs));
  return e;
}

ExprPtr list(std::vector<ExprPtr> items) {
  auto e = std::make_shared<Expr>();
  e->op = ExprOp::ListLit;
  e->args = std::move(items);
  return e;
}

ExprPtr call(std::string name, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->op = ExprOp::Call;
  e->name = std::move(name);
  e->args = std::move(args);
  return e;
}

ExprPtr exists(std::string var, std::string root, ExprPtr condition) {
  auto e = std::make_shared<Expr>();
  e->op = ExprOp::Exists;
  e->name = std::move(var);
  e->frame = std::move(root);
  e->args.push_back(std::move(condition));
  return e;
}

ExprPtr specialize(std::string root) {
  auto e = std::make_shared<Expr>();
  e->op = ExprOp::Specialize;
  e->frame = std::move(root);
  return e;
}

}  // namespace expr

bool is_unary(ExprOp op) { return op == ExprOp::Not || op == ExprOp::Neg; }

bool is_comparison(ExprOp op) {
  switch (op) {
    case ExprOp::Eq:
    case ExprOp::Ne:
    case ExprOp::Lt:
    case ExprOp::Le:
    case ExprOp::Gt:
    case ExprOp::Ge:
    case ExprOp::In: return true;
    default: return false;
  }
}

bool is_binary(ExprOp op) {
  switch (op) {
    case ExprOp::And:
    case ExprOp::Or:
    case ExprOp::Add:
    case ExprOp::Sub:
    case ExprOp::Mul:
    case ExprOp::Div: return true;
    default: return is_comparison(op);
  }
}

std::string_view op_symbol(ExprOp op) {
  switch (op) {
    case ExprOp::Not: return "not";
    case ExprOp::Neg: return "-";
    case ExprOp::And: return "and";
    case ExprOp::Or: return "or";
    case ExprOp::Eq: return "=";
    case ExprOp::Ne: return "<>";
    case ExprOp::Lt: return "<";
    case ExprOp::Le: return "<=";
    case ExprOp::Gt: return ">";
    case ExprOp::Ge: return ">=";
    case ExprOp::Add: return "+";
    case ExprOp::Sub: return "-";
    case ExprOp::Mul: return "*";
    case ExprOp::Div: return "/";
    case ExprOp::In: return "in";
    default: return "";
  }
}

bool equal(const Expr& a, const Expr& b) {
  if (a.op != b.op || a.name != b.name || a.frame != b.frame) return false;
  if (a.op == ExprOp::Literal && !(a.literal == b.literal)) return false;
  if (a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!equal(a.args[i], b.args[i])) return false;
  }
  return true;
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return equal(*a, *b);
}

std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  for (const auto& a : e.args) n += node_count(*a);
  return n;
}

namespace {

// Binding strength; operands weaker than their parent get parenthesised.
int precedence(const Expr& e) {
  switch (e.op) {
    case ExprOp::Or: return 1;
    case ExprOp::And: return 2;
    case ExprOp::Not: return 3;
    case ExprOp::Eq:
    case ExprOp::Ne:
    case ExprOp::Lt:
    case ExprOp::Le:
    case ExprOp::Gt:
    case ExprOp::Ge:
    case ExprOp::In: return 4;
    case ExprOp::Add:
    case ExprOp::Sub: return 5;
    case ExprOp::Mul:
    case ExprOp::Div: return 6;
    case ExprOp::Neg: return 7;
    case ExprOp::Exists: return 0;  // `where` swallows everything to its right
    case ExprOp::Literal:
      return (e.literal.kind() == ValueKind::Integer && e.literal.as_integer() < 0) ? 7 : 8;
    default: return 8;
  }
}

std::string wrap(const Expr& e, bool parens) {
  auto s = format(e);
  return parens ? "(" + s + ")" : s;
}

}  // namespace

std::string format(const Expr& e) {
  switch (e.op) {
    case ExprOp::Literal: return e.literal.to_literal();
    case ExprOp::SlotRef: return e.frame.empty() ? e.name : e.frame + "." + e.name;
    case ExprOp::ListLit: {
      std::string out = "[";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += format(*e.args[i]);
      }
      return out + "]";
    }
    case ExprOp::Call: {
      std::string out = e.name + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += format(*e.args[i]);
      }
      return out + ")";
    }
    case ExprOp::Exists:
      return "exists " + e.name + " in " + e.frame + " where " + format(*e.args[0]);
    case ExprOp::Specialize: return "specialize(" + e.frame + ")";
    case ExprOp::Not: {
      const auto& x = *e.args[0];
      return "not " + wrap(x, precedence(x) < 3);
    }
    case ExprOp::Neg: {
      const auto& x = *e.args[0];
      // `-5` would re-parse as a negative literal, so keep the node explicit.
      bool literal_int = x.op == ExprOp::Literal && x.literal.kind() == ValueKind::Integer;
      return "-" + wrap(x, literal_int || precedence(x) < 7);
    }
    default: break;
  }
  const int p = precedence(e);
  const auto& l = *e.args[0];
  const auto& r = *e.args[1];
  const bool comparison = is_comparison(e.op);
  bool lp = comparison ? precedence(l) <= p : precedence(l) < p;
  bool rp = precedence(r) <= p;
  return wrap(l, lp) + " " + std::string(op_symbol(e.op)) + " " + wrap(r, rp);
}

namespace {
void collect_refs(const Expr& e, std::set<std::string>& out) {
  if (e.op == ExprOp::SlotRef && e.frame.empty()) out.insert(e.name);
  for (const auto& a : e.args) collect_refs(*a, out);
}
}  // namespace

std::set<std::string> unqualified_slot_refs(const Expr& e) {
  std::set<std::string> out;
  collect_refs(e, out);
  return out;
}

bool mentions_slot(const Expr& e, const std::string& slot) {
  if (e.op == ExprOp::SlotRef && e.frame.empty() && e.name == slot) return true;
  for (const auto& a : e.args) {
    if (mentions_slot(*a, slot)) return true;
  }
  return false;
}

}  // namespace fkb
