// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <fstream>
#include <sstream>

#include "fkb/datasources.hpp"
#include "fkb/error.hpp"
#include "fkb/eval.hpp"

namespace fkb {

namespace {

struct Record {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Reads one record starting at `pos`; returns false at end of text.
bool next_record(std::string_view text, std::size_t& pos, Record& out) {
  if (pos >= text.size()) return false;
  out.fields.clear();
  out.begin = pos;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      field += c;
      ++pos;
      continue;
    }
    if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
      ++pos;
      continue;
    }
    if (c == ',') {
      out.fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
      ++pos;
      continue;
    }
    if (c == '\r' || c == '\n') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      break;
    }
    field += c;
    ++pos;
  }
  out.fields.push_back(std::move(field));
  out.end = pos;
  return true;
}

bool blank(const Record& r) { return r.fields.size() == 1 && r.fields[0].empty(); }

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  std::size_t pos = 0;
  Record r;
  while (next_record(text, pos, r)) {
    if (!blank(r)) out.push_back(r.fields);
  }
  return out;
}

Value parse_cell(std::string_view cell) {
  if (cell == "true") return Value::boolean(true);
  if (cell == "false") return Value::boolean(false);
  if (!cell.empty()) {
    std::int64_t n = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec == std::errc{} && ptr == last && first != last) return Value::integer(n);
  }
  return Value::string(std::string(cell));
}

Value typed_cell(const Value& cell, const SlotType& type) {
  if (cell.kind() == type.kind) return cell;
  if (type.kind == ValueKind::String) {
    // Sampled as text: keep the original spelling of numbers and booleans.
    return Value::string(cell.to_display());
  }
  return Value::unknown();
}

std::shared_ptr<TableSource> TableSource::open(const std::filesystem::path& location, const std::string& key_column) {
  std::ifstream in(location, std::ios::binary);
  if (!in) {
    throw Error(Errc::IoError, "cannot read table '" + location.string() + "'", {location.string()});
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::shared_ptr<TableSource> t(new TableSource());
  t->location_ = location;
  t->text_ = buf.str();
  t->key_column_ = key_column;

  std::size_t pos = 0;
  Record r;
  while (next_record(t->text_, pos, r) && blank(r)) {
  }
  if (r.fields.empty() || blank(r)) {
    throw Error(Errc::IoError, "table '" + location.string() + "' has no header row", {location.string()});
  }
  t->columns_ = r.fields;
  auto key = t->column_index(key_column);
  if (!key) {
    throw Error(Errc::MissingKeyColumn, "table '" + location.string() + "' has no column '" + key_column + "'",
                {key_column});
  }
  while (next_record(t->text_, pos, r)) {
    if (blank(r)) continue;
    if (r.fields.size() != t->columns_.size()) {
      throw Error(Errc::IoError,
                  "row " + std::to_string(t->keys_.size() + 1) + " of '" + location.string() + "' has " +
                      std::to_string(r.fields.size()) + " cells, expected " + std::to_string(t->columns_.size()),
                  {location.string()});
    }
    const auto& k = r.fields[*key];
    if (t->index_.count(k)) {
      throw Error(Errc::DuplicateKey, "duplicate key '" + k + "' in '" + location.string() + "'", {k});
    }
    if (t->keys_.empty()) {
      for (const auto& cell : r.fields) {
        auto v = parse_cell(cell);
        t->types_.push_back(v.kind() == ValueKind::Integer || v.kind() == ValueKind::Boolean ? v.type()
                                                                                              : SlotType{ValueKind::String});
      }
    }
    t->index_.emplace(k, t->keys_.size());
    t->keys_.push_back(k);
    t->spans_.emplace_back(r.begin, r.end);
  }
  if (t->types_.empty()) t->types_.assign(t->columns_.size(), SlotType{ValueKind::String});
  return t;
}

std::optional<std::size_t> TableSource::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<Value> TableSource::decode(std::size_t index) const {
  const auto [begin, end] = spans_[index];
  std::size_t pos = begin;
  Record r;
  next_record(std::string_view(text_).substr(0, end), pos, r);
  ++rows_read_;
  std::vector<Value> out;
  for (std::size_t i = 0; i < r.fields.size(); ++i) out.push_back(typed_cell(parse_cell(r.fields[i]), types_[i]));
  return out;
}

std::optional<std::vector<Value>> TableSource::row(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return decode(it->second);
}

std::vector<std::vector<Value>> TableSource::rows() const {
  std::vector<std::vector<Value>> out;
  for (std::size_t i = 0; i < keys_.size(); ++i) out.push_back(decode(i));
  return out;
}

namespace {

class NoContext : public EvalContext {
public:
  Value slot(const Expr&) override { return Value::unknown(); }
};

}  // namespace

Value query_table(const TableSource& table, const std::string& column, const std::string& key_column, ExprOp op,
                  const Value& key) {
  return query_table(table, column, key_column, op, key, [&](const std::string& k) { return *table.row(k); });
}

Value query_table(const TableSource& table, const std::string& column, const std::string& key_column, ExprOp op,
                  const Value& key, const RowFetch& fetch) {
  auto col = table.column_index(column);
  if (!col) throw Error(Errc::UnknownColumn, "table has no column '" + column + "'", {column});
  auto key_col = table.column_index(key_column);
  if (!key_col) throw Error(Errc::UnknownColumn, "table has no column '" + key_column + "'", {key_column});
  if (key.is_unknown()) return Value::unknown();
  std::vector<Value> matches;
  NoContext ctx;
  for (const auto& k : table.keys()) {
    const auto row = fetch(k);
    const auto& cell = row[*key_col];
    if (cell.is_unknown()) continue;
    Value holds;
    try {
      holds = evaluate(*expr::binary(op, expr::lit(cell), expr::lit(key)), ctx);
    } catch (const Error&) {
      continue;  // cell of another kind never matches
    }
    if (holds.kind() == ValueKind::Boolean && holds.as_boolean() && row[*col].is_known()) {
      matches.push_back(row[*col]);
    }
  }
  if (matches.empty()) return Value::unknown();
  if (matches.size() == 1) return matches.front();
  return Value::list(table.column_types()[*col].kind, std::move(matches));
}

std::string member_name(const std::string& frameset, const std::string& key) { return frameset + "_" + key; }

FrameDef member_frame(const FrameDef& frameset, const TableSource& table, const std::string& key) {
  FrameDef f;
  f.name = member_name(frameset.name, key);
  f.parent = frameset.parent;
  f.kind = FrameKind::FramesetMember;
  f.table = frameset.name;
  f.key = key;
  for (std::size_t i = 0; i < table.columns().size(); ++i) {
    f.slots.push_back({table.columns()[i], table.column_types()[i], std::nullopt});
  }
  return f;
}

}  // namespace fkb
