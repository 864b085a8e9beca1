// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "fkb/expr.hpp"
#include "fkb/value.hpp"

namespace fkb {

/// Supplies whatever an expression cannot compute from its own operands.
/// The default hooks yield Unknown, which is what a pure working-memory
/// evaluation wants.
class EvalContext {
public:
  virtual ~EvalContext() = default;
  virtual Value slot(const Expr& ref) = 0;
  virtual Value call(const Expr& call, std::vector<Value> args);
  virtual Value exists(const Expr& node);
  virtual Value specialize(const Expr& node);
};

/// Three-valued evaluation: comparisons and arithmetic over Unknown give
/// Unknown; `and`/`or` short-circuit left to right with Kleene semantics.
/// Kind mismatches, division by zero and overflow throw Errc::EvalError.
Value evaluate(const Expr& e, EvalContext& ctx);

}  // namespace fkb
