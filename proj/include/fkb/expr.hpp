// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "fkb/value.hpp"

namespace fkb {

enum class ExprOp {
  Literal,
  SlotRef,
  ListLit,
  Not,
  Neg,
  And,
  Or,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Add,
  Sub,
  Mul,
  Div,
  In,
  Call,
  Exists,
  Specialize,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree node. Field use per op:
///   Literal     literal
///   SlotRef     name = slot, frame = optional qualifier (frame or bound variable)
///   Call        name = function, args
///   Exists      name = variable, frame = subtree root, args[0] = condition
///   Specialize  frame = subtree root
///   unary/binary/ListLit  args
struct Expr {
  ExprOp op = ExprOp::Literal;
  Value literal;
  std::string name;
  std::string frame;
  std::vector<ExprPtr> args;
};

namespace expr {
ExprPtr lit(Value v);
ExprPtr slot(std::string name, std::string qualifier = {});
ExprPtr unary(ExprOp op, ExprPtr operand);
ExprPtr binary(ExprOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr list(std::vector<ExprPtr> items);
ExprPtr call(std::string name, std::vector<ExprPtr> args);
ExprPtr exists(std::string var, std::string root, ExprPtr condition);
ExprPtr specialize(std::string root);
}  // namespace expr

bool is_unary(ExprOp op);
bool is_binary(ExprOp op);
bool is_comparison(ExprOp op);
std::string_view op_symbol(ExprOp op);

/// Structural equality over whole trees.
bool equal(const Expr& a, const Expr& b);
bool equal(const ExprPtr& a, const ExprPtr& b);

/// Total node count; the complexity metric of the most-complex-first resolver.
std::size_t node_count(const Expr& e);

/// Source rendering with minimal parentheses; re-parses to an equal tree.
std::string format(const Expr& e);

/// Unqualified slot names referenced outside any `exists` binding.
std::set<std::string> unqualified_slot_refs(const Expr& e);
bool mentions_slot(const Expr& e, const std::string& slot);

}  // namespace fkb
