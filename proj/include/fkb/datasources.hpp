// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fkb/frame.hpp"

namespace fkb {

/// Splits RFC 4180 style text (comma separator, `"` quoting, `""` escape,
/// CRLF or LF line ends) into records. Quoted fields may span lines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Typing of one cell: integers, `true`/`false`, otherwise string.
Value parse_cell(std::string_view cell);

/// Read-only keyed table backed by a delimited text file. Opening reads the
/// header and scans the key column to build an index of record offsets;
/// full records are decoded only on demand and counted in rows_read().
class TableSource {
public:
  /// Throws IoError, MissingKeyColumn or DuplicateKey(value).
  static std::shared_ptr<TableSource> open(const std::filesystem::path& location, const std::string& key_column);

  const std::filesystem::path& location() const { return location_; }
  const std::vector<std::string>& columns() const { return columns_; }
  const std::string& key_column() const { return key_column_; }
  std::optional<std::size_t> column_index(std::string_view name) const;
  /// Slot types sampled from the first data row (string for an empty table).
  const std::vector<SlotType>& column_types() const { return types_; }
  /// Key cell text of every data row in file order.
  const std::vector<std::string>& keys() const { return keys_; }
  std::size_t row_count() const { return keys_.size(); }
  bool contains(std::string_view key) const { return index_.find(key) != index_.end(); }

  /// Decoded cells of the row with this key; nullopt when absent.
  std::optional<std::vector<Value>> row(const std::string& key) const;
  /// Every row in file order.
  std::vector<std::vector<Value>> rows() const;

  /// Data records decoded so far (the header and the key scan excluded).
  std::uint64_t rows_read() const { return rows_read_.load(); }

private:
  TableSource() = default;
  std::vector<Value> decode(std::size_t index) const;

  std::filesystem::path location_;
  std::string text_;
  std::string key_column_;
  std::vector<std::string> columns_;
  std::vector<SlotType> types_;
  std::vector<std::string> keys_;
  std::vector<std::pair<std::size_t, std::size_t>> spans_;  // byte range of each record
  std::map<std::string, std::size_t, std::less<>> index_;
  mutable std::atomic<std::uint64_t> rows_read_{0};
};

/// Cell typed against a member slot; a cell of another kind reads as Unknown.
Value typed_cell(const Value& cell, const SlotType& type);

/// `column` of every row whose `key_column <op> key` holds, in file order:
/// no match gives Unknown, one match the scalar, several a list.
/// Throws UnknownColumn.
Value query_table(const TableSource& table, const std::string& column, const std::string& key_column, ExprOp op,
                  const Value& key);

/// Same, reading rows through `fetch` (keyed by row key) so callers can
/// keep their own row cache.
using RowFetch = std::function<std::vector<Value>(const std::string& key)>;
Value query_table(const TableSource& table, const std::string& column, const std::string& key_column, ExprOp op,
                  const Value& key, const RowFetch& fetch);

/// Name of the member frame generated for a row: `<frameset>_<key>`.
std::string member_name(const std::string& frameset, const std::string& key);

/// Frame definition of a frameset member: one slot per column, parent taken
/// from the frameset declaration. Values are served from the row, not
/// stored as defaults.
FrameDef member_frame(const FrameDef& frameset, const TableSource& table, const std::string& key);

}  // namespace fkb
