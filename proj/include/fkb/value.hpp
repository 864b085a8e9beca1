// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace fkb {

enum class ValueKind { Integer, Boolean, String, Reference, List, Unknown };

std::string_view to_string(ValueKind kind);
std::optional<ValueKind> value_kind_from_string(std::string_view name);

bool is_scalar(ValueKind kind);
bool is_identifier(std::string_view text);

/// Declared type of a slot. `element` is meaningful only for lists.
struct SlotType {
  ValueKind kind = ValueKind::Unknown;
  ValueKind element = ValueKind::Unknown;

  static SlotType list_of(ValueKind element) { return {ValueKind::List, element}; }

  std::string name() const;
  friend bool operator==(const SlotType&, const SlotType&) = default;
};

struct FrameRef {
  std::string name;
  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

/// Typed datum held by slots. Lists are homogeneous over one scalar kind; an
/// empty list built from a literal `[]` has element kind Unknown and adopts
/// the element kind of whatever slot it is stored in.
class Value {
public:
  Value() = default;

  static Value integer(std::int64_t v);
  static Value boolean(bool v);
  static Value string(std::string v);
  static Value reference(std::string frame);
  /// Throws Errc::TypeMismatch (with offending index) on a heterogeneous list.
  static Value list(ValueKind element, std::vector<Value> items);
  static Value unknown() { return {}; }

  ValueKind kind() const;
  bool is_unknown() const { return kind() == ValueKind::Unknown; }
  bool is_known() const { return !is_unknown(); }

  std::int64_t as_integer() const;
  bool as_boolean() const;
  const std::string& as_string() const;
  const std::string& as_reference() const;
  const std::vector<Value>& items() const;
  ValueKind element_kind() const;

  SlotType type() const;
  /// Literal rendering in knowledge-language syntax (`12`, `"a\"b"`, `[1, 2]`).
  std::string to_literal() const;
  /// Plain rendering used in terminal output (`true`, `abc`, `[1, 2]`).
  std::string to_display() const;

  friend bool operator==(const Value& a, const Value& b);

private:
  struct List {
    ValueKind element = ValueKind::Unknown;
    std::vector<Value> items;
    friend bool operator==(const List&, const List&) = default;
  };
  using Payload = std::variant<std::monostate, std::int64_t, bool, std::string, FrameRef, List>;
  explicit Value(Payload p) : payload_(std::move(p)) {}

  Payload payload_;
};

/// Does `value` fit a slot of `type`? Unknown fits everything.
bool admits(const SlotType& type, const Value& value);

/// Adopts the slot's element kind for an untyped empty list; otherwise identity.
Value conform(const SlotType& type, Value value);

/// Builds a Value of `type` from a loosely typed datum. No cross-kind
/// coercion: the string "4" is not an integer, "true" is not a boolean.
/// JSON null yields Unknown.
Value make_value(const SlotType& type, const nlohmann::json& raw);

/// Parses a user-typed answer (`12`, `true`, `abc`, `[1,2]`) for `type`.
Value parse_answer(const SlotType& type, std::string_view text);

nlohmann::json to_json(const Value& value);

}  // namespace fkb
