// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fkb/expr.hpp"
#include "fkb/value.hpp"

namespace fkb {

/// Every frame implicitly carries this reference slot; assigning it re-parents
/// the frame at run time.
inline constexpr std::string_view kParentSlot = "parent";

struct SlotDef {
  std::string name;
  SlotType type;
  std::optional<Value> default_value;
};

enum class Direction { Backward, Forward };

/// Production rule. Backward rules conclude exactly `target_slot`; forward
/// rules fire when `target_slot` changes and may set several slots.
struct Rule {
  std::string target_slot;
  ExprPtr condition;  // null = unconditional
  std::vector<std::pair<std::string, ExprPtr>> assignments;
  Direction direction = Direction::Backward;
};

/// Table lookup performed when a slot value is needed:
/// `column` of the first/all rows where `key_column <op> key`.
struct QuerySpec {
  std::string table;
  std::string column;
  std::string key_column;
  ExprOp op = ExprOp::Eq;
  ExprPtr key;
};

enum class ActionKind { BackwardRule, ForwardRule, AskUser, QueryValue };

std::string_view to_string(ActionKind kind);

struct Action {
  ActionKind kind = ActionKind::BackwardRule;
  std::string slot;                // slot this action concludes / listens on
  std::optional<Rule> rule;        // rules only
  std::string prompt;              // ask only
  std::optional<QuerySpec> query;  // query only

  static Action backward(Rule r);
  static Action forward(Rule r);
  static Action ask(std::string slot, std::string prompt);
  static Action query_value(std::string slot, QuerySpec q);
};

enum class FrameKind {
  Local,
  RemoteStub,      // proxy for a frame hosted on another instance
  Frameset,        // declaration binding a table to a family of member frames
  ExternalObject,  // slots served by a registered adapter
  FramesetMember,  // synthesised per session from a table row; never stored in a world
};

std::string_view to_string(FrameKind kind);

struct FrameDef {
  std::string name;
  std::optional<std::string> parent;
  FrameKind kind = FrameKind::Local;
  std::string url;         // RemoteStub
  std::string table;       // Frameset: table location
  std::string key;         // Frameset: key column; FramesetMember: key value
  std::vector<SlotDef> slots;
  std::vector<ExprPtr> constraints;
  std::vector<Action> actions;  // declaration order, all kinds interleaved
  std::optional<std::string> rules_from;

  const SlotDef* find_slot(std::string_view slot) const;
  bool declares(std::string_view slot) const { return find_slot(slot) != nullptr; }
};

bool equal(const Rule& a, const Rule& b);
bool equal(const Action& a, const Action& b);
bool equal(const FrameDef& a, const FrameDef& b);

}  // namespace fkb
