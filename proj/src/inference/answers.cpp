// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <charconv>

#include "fkb/session.hpp"

namespace fkb {

namespace {

std::string_view trim(std::string_view t) {
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
  return t;
}

Value scalar(std::string_view t, ValueKind kind) {
  t = trim(t);
  switch (kind) {
    case ValueKind::Integer: {
      std::int64_t n = 0;
      auto first = t.data();
      if (!t.empty() && t.front() == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), n);
      if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) return Value::unknown();
      return Value::integer(n);
    }
    case ValueKind::Boolean:
      if (t == "true") return Value::boolean(true);
      if (t == "false") return Value::boolean(false);
      return Value::unknown();
    case ValueKind::String:
      if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
      return Value::string(std::string(t));
    case ValueKind::Reference:
      return is_identifier(t) ? Value::reference(std::string(t)) : Value::unknown();
    default:
      return parse_cell(std::string(t));
  }
}

}  // namespace

Value parse_answer(std::string_view text, const SlotType& type) {
  if (type.kind != ValueKind::List) return scalar(text, type.kind);
  auto t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') return Value::unknown();
  t = trim(t.substr(1, t.size() - 2));
  std::vector<Value> items;
  while (!t.empty()) {
    auto comma = t.find(',');
    auto v = scalar(t.substr(0, comma), type.element);
    if (v.is_unknown()) return Value::unknown();
    items.push_back(std::move(v));
    if (comma == std::string_view::npos) break;
    t = t.substr(comma + 1);
  }
  return Value::list(type.element, std::move(items));
}

}  // namespace fkb
