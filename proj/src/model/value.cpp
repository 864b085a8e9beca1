// SPDX-License-Identifier: Apache-2.0
#include "fkb/value.hpp"

#include <charconv>

#include "fkb/error.hpp"

namespace fkb {

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Integer: return "integer";
    case ValueKind::Boolean: return "boolean";
    case ValueKind::String: return "string";
    case ValueKind::Reference: return "reference";
    case ValueKind::List: return "list";
    case ValueKind::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<ValueKind> value_kind_from_string(std::string_view name) {
  for (auto k : {ValueKind::Integer, ValueKind::Boolean, ValueKind::String, ValueKind::Reference,
                 ValueKind::List, ValueKind::Unknown}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

bool is_scalar(ValueKind kind) {
  return kind == ValueKind::Integer || kind == ValueKind::Boolean || kind == ValueKind::String;
}

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
  if (!alpha(text.front())) return false;
  for (char c : text) {
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

std::string SlotType::name() const {
  if (kind == ValueKind::List) return "list of " + std::string(to_string(element));
  return std::string(to_string(kind));
}

Value Value::integer(std::int64_t v) { return Value(Payload{v}); }
Value Value::boolean(bool v) { return Value(Payload{v}); }
Value Value::string(std::string v) { return Value(Payload{std::move(v)}); }
Value Value::reference(std::string frame) { return Value(Payload{FrameRef{std::move(frame)}}); }

Value Value::list(ValueKind element, std::vector<Value> items) {
  if (element != ValueKind::Unknown && !is_scalar(element)) {
    throw Error(Errc::TypeMismatch, "list element kind must be scalar, got " +
                                        std::string(to_string(element)));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto k = items[i].kind();
    if (!is_scalar(k)) {
      throw Error(Errc::TypeMismatch, "list element " + std::to_string(i) + " is not scalar",
                  {std::to_string(i)});
    }
    if (element == ValueKind::Unknown) element = k;
    if (k != element) {
      throw Error(Errc::TypeMismatch,
                  "list element " + std::to_string(i) + " is " + std::string(to_string(k)) +
                      ", expected " + std::string(to_string(element)),
                  {std::to_string(i)});
    }
  }
  return Value(Payload{List{element, std::move(items)}});
}

ValueKind Value::kind() const {
  switch (payload_.index()) {
    case 1: return ValueKind::Integer;
    case 2: return ValueKind::Boolean;
    case 3: return ValueKind::String;
    case 4: return ValueKind::Reference;
    case 5: return ValueKind::List;
    default: return ValueKind::Unknown;
  }
}

namespace {
[[noreturn]] void wrong_kind(ValueKind want, ValueKind got) {
  throw Error(Errc::TypeMismatch, "expected " + std::string(to_string(want)) + " value, got " +
                                      std::string(to_string(got)));
}
}  // namespace

std::int64_t Value::as_integer() const {
  if (auto p = std::get_if<std::int64_t>(&payload_)) return *p;
  wrong_kind(ValueKind::Integer, kind());
}

bool Value::as_boolean() const {
  if (auto p = std::get_if<bool>(&payload_)) return *p;
  wrong_kind(ValueKind::Boolean, kind());
}

const std::string& Value::as_string() const {
  if (auto p = std::get_if<std::string>(&payload_)) return *p;
  wrong_kind(ValueKind::String, kind());
}

const std::string& Value::as_reference() const {
  if (auto p = std::get_if<FrameRef>(&payload_)) return p->name;
  wrong_kind(ValueKind::Reference, kind());
}

const std::vector<Value>& Value::items() const {
  if (auto p = std::get_if<List>(&payload_)) return p->items;
  wrong_kind(ValueKind::List, kind());
}

ValueKind Value::element_kind() const {
  if (auto p = std::get_if<List>(&payload_)) return p->element;
  return ValueKind::Unknown;
}

SlotType Value::type() const {
  if (kind() == ValueKind::List) return SlotType::list_of(element_kind());
  return {kind(), ValueKind::Unknown};
}

namespace {
std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}
}  // namespace

std::string Value::to_literal() const {
  switch (kind()) {
    case ValueKind::Integer: return std::to_string(as_integer());
    case ValueKind::Boolean: return as_boolean() ? "true" : "false";
    case ValueKind::String: return quote(as_string());
    case ValueKind::Reference: return "frame " + as_reference();
    case ValueKind::List: {
      std::string out = "[";
      const auto& xs = items();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += xs[i].to_literal();
      }
      return out + "]";
    }
    case ValueKind::Unknown: return "unknown";
  }
  return "unknown";
}

std::string Value::to_display() const {
  switch (kind()) {
    case ValueKind::String: return as_string();
    case ValueKind::Reference: return as_reference();
    case ValueKind::List: {
      std::string out = "[";
      const auto& xs = items();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += xs[i].to_display();
      }
      return out + "]";
    }
    default: return to_literal();
  }
}

bool operator==(const Value& a, const Value& b) {
  if (a.kind() != b.kind()) return false;
  if (a.kind() == ValueKind::List) {
    const auto& x = a.items();
    const auto& y = b.items();
    if (x.empty() && y.empty()) return true;
    return a.element_kind() == b.element_kind() && x == y;
  }
  return a.payload_ == b.payload_;
}

bool admits(const SlotType& type, const Value& value) {
  if (value.is_unknown()) return true;
  if (type.kind == ValueKind::Unknown) return true;
  if (value.kind() != type.kind) return false;
  if (type.kind == ValueKind::List) {
    return value.items().empty() || value.element_kind() == type.element;
  }
  return true;
}

Value conform(const SlotType& type, Value value) {
  if (type.kind == ValueKind::List && value.kind() == ValueKind::List && value.items().empty() &&
      value.element_kind() != type.element) {
    return Value::list(type.element, {});
  }
  return value;
}

namespace {

Value make_scalar(ValueKind kind, const nlohmann::json& raw, const std::string& where) {
  auto mismatch = [&]() -> Error {
    return Error(Errc::TypeMismatch,
                 where + "expected " + std::string(to_string(kind)) + ", got " + raw.dump());
  };
  switch (kind) {
    case ValueKind::Integer:
      if (raw.is_number_integer()) return Value::integer(raw.get<std::int64_t>());
      if (raw.is_number_unsigned() && raw.get<std::uint64_t>() <= INT64_MAX) {
        return Value::integer(static_cast<std::int64_t>(raw.get<std::uint64_t>()));
      }
      throw mismatch();
    case ValueKind::Boolean:
      if (raw.is_boolean()) return Value::boolean(raw.get<bool>());
      throw mismatch();
    case ValueKind::String:
      if (raw.is_string()) return Value::string(raw.get<std::string>());
      throw mismatch();
    case ValueKind::Reference:
      if (raw.is_string() && is_identifier(raw.get<std::string>())) {
        return Value::reference(raw.get<std::string>());
      }
      throw mismatch();
    default: throw mismatch();
  }
}

}  // namespace

Value make_value(const SlotType& type, const nlohmann::json& raw) {
  if (raw.is_null()) return Value::unknown();
  if (type.kind == ValueKind::List) {
    if (!raw.is_array()) {
      throw Error(Errc::TypeMismatch, "expected " + type.name() + ", got " + raw.dump());
    }
    std::vector<Value> items;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      try {
        items.push_back(make_scalar(type.element, raw[i], ""));
      } catch (const Error&) {
        throw Error(Errc::TypeMismatch,
                    "list element " + std::to_string(i) + ": expected " +
                        std::string(to_string(type.element)) + ", got " + raw[i].dump(),
                    {std::to_string(i)});
      }
    }
    return Value::list(type.element, std::move(items));
  }
  return make_scalar(type.kind, raw, "");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Value parse_scalar_answer(ValueKind kind, std::string_view text) {
  text = trim(text);
  auto fail = [&]() -> Error {
    return Error(Errc::TypeMismatch, "expected " + std::string(to_string(kind)) + ", got '" +
                                         std::string(text) + "'");
  };
  switch (kind) {
    case ValueKind::Integer: {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) throw fail();
      return Value::integer(v);
    }
    case ValueKind::Boolean:
      if (text == "true") return Value::boolean(true);
      if (text == "false") return Value::boolean(false);
      throw fail();
    case ValueKind::String:
      if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
        return Value::string(std::string(text.substr(1, text.size() - 2)));
      }
      return Value::string(std::string(text));
    case ValueKind::Reference:
      if (!is_identifier(text)) throw fail();
      return Value::reference(std::string(text));
    default: throw fail();
  }
}

}  // namespace

Value parse_answer(const SlotType& type, std::string_view text) {
  if (trim(text) == "unknown") return Value::unknown();
  if (type.kind == ValueKind::Unknown) {
    // Slot type is not visible locally (declared on a remote frame): guess.
    auto t = trim(text);
    if (t == "true" || t == "false") return Value::boolean(t == "true");
    try {
      return parse_scalar_answer(ValueKind::Integer, t);
    } catch (const Error&) {
      return parse_scalar_answer(ValueKind::String, t);
    }
  }
  if (type.kind != ValueKind::List) return parse_scalar_answer(type.kind, text);

  auto body = trim(text);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']') {
    throw Error(Errc::TypeMismatch, "expected " + type.name() + " like [a, b], got '" +
                                        std::string(body) + "'");
  }
  body = trim(body.substr(1, body.size() - 2));
  std::vector<Value> items;
  std::size_t index = 0;
  while (!body.empty()) {
    auto comma = body.find(',');
    auto piece = body.substr(0, comma);
    try {
      items.push_back(parse_scalar_answer(type.element, piece));
    } catch (const Error& e) {
      throw Error(Errc::TypeMismatch, "list element " + std::to_string(index) + ": " + e.what(),
                  {std::to_string(index)});
    }
    ++index;
    if (comma == std::string_view::npos) break;
    body = trim(body.substr(comma + 1));
  }
  return Value::list(type.element, std::move(items));
}

nlohmann::json to_json(const Value& value) {
  switch (value.kind()) {
    case ValueKind::Integer: return value.as_integer();
    case ValueKind::Boolean: return value.as_boolean();
    case ValueKind::String: return value.as_string();
    case ValueKind::Reference: return value.as_reference();
    case ValueKind::List: {
      auto arr = nlohmann::json::array();
      for (const auto& v : value.items()) arr.push_back(to_json(v));
      return arr;
    }
    case ValueKind::Unknown: return nullptr;
  }
  return nullptr;
}

}  // namespace fkb
