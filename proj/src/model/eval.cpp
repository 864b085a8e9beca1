// SPDX-License-Identifier: Apache-2.0
#include "fkb/eval.hpp"

#include "fkb/error.hpp"

namespace fkb {

Value EvalContext::call(const Expr& call, std::vector<Value>) {
  throw Error(Errc::EvalError, "function " + call.name + " is not available here");
}

Value EvalContext::exists(const Expr&) { return Value::unknown(); }
Value EvalContext::specialize(const Expr&) { return Value::unknown(); }

namespace {

[[noreturn]] void fail(const std::string& message) { throw Error(Errc::EvalError, message); }

bool truth(const Value& v, const Expr& e) {
  if (v.kind() != ValueKind::Boolean) {
    fail("operand of '" + std::string(op_symbol(e.op)) + "' is " + std::string(to_string(v.kind())) +
         ", expected boolean");
  }
  return v.as_boolean();
}

std::int64_t integer_operand(const Value& v, const Expr& e) {
  if (v.kind() != ValueKind::Integer) {
    fail("operand of '" + std::string(op_symbol(e.op)) + "' is " + std::string(to_string(v.kind())) +
         ", expected integer");
  }
  return v.as_integer();
}

Value arithmetic(const Expr& e, const Value& l, const Value& r) {
  if (l.is_unknown() || r.is_unknown()) return Value::unknown();
  const auto a = integer_operand(l, e);
  const auto b = integer_operand(r, e);
  std::int64_t out = 0;
  switch (e.op) {
    case ExprOp::Add:
      if (__builtin_add_overflow(a, b, &out)) fail("integer overflow in +");
      return Value::integer(out);
    case ExprOp::Sub:
      if (__builtin_sub_overflow(a, b, &out)) fail("integer overflow in -");
      return Value::integer(out);
    case ExprOp::Mul:
      if (__builtin_mul_overflow(a, b, &out)) fail("integer overflow in *");
      return Value::integer(out);
    case ExprOp::Div:
      if (b == 0) fail("division by zero");
      if (a == INT64_MIN && b == -1) fail("integer overflow in /");
      return Value::integer(a / b);  // truncates toward zero
    default: fail("not an arithmetic operator");
  }
}

Value compare(const Expr& e, const Value& l, const Value& r) {
  if (l.is_unknown() || r.is_unknown()) return Value::unknown();
  if (l.kind() != r.kind()) {
    fail("cannot compare " + std::string(to_string(l.kind())) + " with " +
         std::string(to_string(r.kind())));
  }
  if (e.op == ExprOp::Eq) return Value::boolean(l == r);
  if (e.op == ExprOp::Ne) return Value::boolean(!(l == r));

  int c = 0;
  if (l.kind() == ValueKind::Integer) {
    c = l.as_integer() < r.as_integer() ? -1 : (l.as_integer() > r.as_integer() ? 1 : 0);
  } else if (l.kind() == ValueKind::String) {
    c = l.as_string().compare(r.as_string());
  } else {
    fail("ordering is not defined for " + std::string(to_string(l.kind())));
  }
  switch (e.op) {
    case ExprOp::Lt: return Value::boolean(c < 0);
    case ExprOp::Le: return Value::boolean(c <= 0);
    case ExprOp::Gt: return Value::boolean(c > 0);
    case ExprOp::Ge: return Value::boolean(c >= 0);
    default: fail("not a comparison");
  }
}

Value membership(const Value& l, const Value& r) {
  if (l.is_unknown() || r.is_unknown()) return Value::unknown();
  if (r.kind() != ValueKind::List) {
    fail("right operand of 'in' is " + std::string(to_string(r.kind())) + ", expected list");
  }
  if (!r.items().empty() && r.element_kind() != l.kind()) {
    fail("cannot test " + std::string(to_string(l.kind())) + " for membership in list of " +
         std::string(to_string(r.element_kind())));
  }
  for (const auto& item : r.items()) {
    if (item == l) return Value::boolean(true);
  }
  return Value::boolean(false);
}

}  // namespace

Value evaluate(const Expr& e, EvalContext& ctx) {
  switch (e.op) {
    case ExprOp::Literal: return e.literal;
    case ExprOp::SlotRef: return ctx.slot(e);
    case ExprOp::ListLit: {
      std::vector<Value> items;
      items.reserve(e.args.size());
      for (const auto& a : e.args) {
        auto v = evaluate(*a, ctx);
        if (v.is_unknown()) return Value::unknown();
        items.push_back(std::move(v));
      }
      try {
        return Value::list(ValueKind::Unknown, std::move(items));
      } catch (const Error& err) {
        fail(std::string("list literal: ") + err.what());
      }
    }
    case ExprOp::Not: {
      auto v = evaluate(*e.args[0], ctx);
      if (v.is_unknown()) return v;
      return Value::boolean(!truth(v, e));
    }
    case ExprOp::Neg: {
      auto v = evaluate(*e.args[0], ctx);
      if (v.is_unknown()) return v;
      auto x = integer_operand(v, e);
      if (x == INT64_MIN) fail("integer overflow in unary -");
      return Value::integer(-x);
    }
    case ExprOp::And: {
      auto l = evaluate(*e.args[0], ctx);
      if (l.is_known() && !truth(l, e)) return Value::boolean(false);
      auto r = evaluate(*e.args[1], ctx);
      if (r.is_known() && !truth(r, e)) return Value::boolean(false);
      if (l.is_unknown() || r.is_unknown()) return Value::unknown();
      return Value::boolean(true);
    }
    case ExprOp::Or: {
      auto l = evaluate(*e.args[0], ctx);
      if (l.is_known() && truth(l, e)) return Value::boolean(true);
      auto r = evaluate(*e.args[1], ctx);
      if (r.is_known() && truth(r, e)) return Value::boolean(true);
      if (l.is_unknown() || r.is_unknown()) return Value::unknown();
      return Value::boolean(false);
    }
    case ExprOp::Eq:
    case ExprOp::Ne:
    case ExprOp::Lt:
    case ExprOp::Le:
    case ExprOp::Gt:
    case ExprOp::Ge: {
      auto l = evaluate(*e.args[0], ctx);
      auto r = evaluate(*e.args[1], ctx);
      return compare(e, l, r);
    }
    case ExprOp::In: {
      auto l = evaluate(*e.args[0], ctx);
      auto r = evaluate(*e.args[1], ctx);
      return membership(l, r);
    }
    case ExprOp::Add:
    case ExprOp::Sub:
    case ExprOp::Mul:
    case ExprOp::Div: {
      auto l = evaluate(*e.args[0], ctx);
      auto r = evaluate(*e.args[1], ctx);
      return arithmetic(e, l, r);
    }
    case ExprOp::Call: {
      std::vector<Value> args;
      args.reserve(e.args.size());
      for (const auto& a : e.args) args.push_back(evaluate(*a, ctx));
      return ctx.call(e, std::move(args));
    }
    case ExprOp::Exists: return ctx.exists(e);
    case ExprOp::Specialize: return ctx.specialize(e);
  }
  fail("malformed expression");
}

}  // namespace fkb
