// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fkb/datasources.hpp"
#include "fkb/error.hpp"

using namespace fkb;

namespace {

std::filesystem::path write_table(const std::string& name, const std::string& text) {
  auto dir = std::filesystem::temp_directory_path() / ("fkb_ds_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto path = dir / name;
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::BadGoal;
}

}  // namespace

TEST(Csv, QuotingAndLineEnds) {
  auto rows = parse_csv("a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\n\"multi\nline\",z\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x,1");
  EXPECT_EQ(rows[1][1], "say \"hi\"");
  EXPECT_EQ(rows[2][0], "multi\nline");
}

TEST(Csv, CellTyping) {
  EXPECT_EQ(parse_cell("42"), Value::integer(42));
  EXPECT_EQ(parse_cell("-7"), Value::integer(-7));
  EXPECT_EQ(parse_cell("true"), Value::boolean(true));
  EXPECT_EQ(parse_cell("True"), Value::string("True"));
  EXPECT_EQ(parse_cell("4x"), Value::string("4x"));
  EXPECT_EQ(parse_cell(""), Value::string(""));
}

TEST(Table, OpenAndRows) {
  auto t = TableSource::open(write_table("wheels.csv", "id,name,wheels\n1,trike,3\n2,car,4\n"), "id");
  EXPECT_EQ(t->columns(), (std::vector<std::string>{"id", "name", "wheels"}));
  EXPECT_EQ(t->keys(), (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(t->rows_read(), 0u);
  auto row = t->row("2");
  ASSERT_TRUE(row);
  EXPECT_EQ((*row)[1], Value::string("car"));
  EXPECT_EQ((*row)[2], Value::integer(4));
  EXPECT_EQ(t->rows_read(), 1u);
  EXPECT_FALSE(t->row("9"));
  EXPECT_EQ(t->column_types()[2], SlotType{ValueKind::Integer});
}

TEST(Table, Errors) {
  EXPECT_EQ(code_of([] { TableSource::open("/nonexistent/t.csv", "id"); }), Errc::IoError);
  EXPECT_EQ(code_of([] { TableSource::open(write_table("k.csv", "a,b\n1,2\n"), "id"); }), Errc::MissingKeyColumn);
  EXPECT_EQ(code_of([] { TableSource::open(write_table("d.csv", "id,x\n1,a\n1,b\n"), "id"); }), Errc::DuplicateKey);
}

TEST(Table, MismatchedCellsReadUnknown) {
  auto t = TableSource::open(write_table("m.csv", "id,n,s\n1,5,x\n2,five,7\n"), "id");
  auto row = *t->row("2");
  EXPECT_TRUE(row[1].is_unknown());
  EXPECT_EQ(row[2], Value::string("7"));
}

TEST(Query, CardinalityLaw) {
  auto t = TableSource::open(write_table("q.csv", "id,name,wheels\n1,trike,3\n2,car,4\n3,bus,6\n"), "id");
  EXPECT_EQ(query_table(*t, "wheels", "name", ExprOp::Eq, Value::string("trike")), Value::integer(3));
  EXPECT_EQ(query_table(*t, "wheels", "wheels", ExprOp::Gt, Value::integer(3)),
            Value::list(ValueKind::Integer, {Value::integer(4), Value::integer(6)}));
  EXPECT_TRUE(query_table(*t, "wheels", "name", ExprOp::Eq, Value::string("ship")).is_unknown());
  EXPECT_TRUE(query_table(*t, "wheels", "name", ExprOp::Eq, Value::unknown()).is_unknown());
  EXPECT_EQ(code_of([&] { query_table(*t, "colour", "name", ExprOp::Eq, Value::string("x")); }), Errc::UnknownColumn);

  // Result kind depends only on the match count.
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto bound = static_cast<std::int64_t>(rng() % 8);
    auto v = query_table(*t, "name", "wheels", ExprOp::Lt, Value::integer(bound));
    int matches = (bound > 3) + (bound > 4) + (bound > 6);
    if (matches == 0) EXPECT_TRUE(v.is_unknown());
    if (matches == 1) EXPECT_EQ(v.kind(), ValueKind::String);
    if (matches > 1) {
      ASSERT_EQ(v.kind(), ValueKind::List);
      EXPECT_EQ(static_cast<int>(v.items().size()), matches);
    }
  }
}

TEST(Members, NamingAndSlots) {
  auto t = TableSource::open(write_table("w.csv", "id,name,wheels\n1,trike,3\n"), "id");
  FrameDef fs;
  fs.name = "V";
  fs.parent = "Base";
  fs.kind = FrameKind::Frameset;
  auto m = member_frame(fs, *t, "1");
  EXPECT_EQ(m.name, "V_1");
  EXPECT_EQ(member_name("V", "1"), "V_1");
  EXPECT_EQ(m.parent, std::optional<std::string>("Base"));
  EXPECT_EQ(m.kind, FrameKind::FramesetMember);
  ASSERT_EQ(m.slots.size(), 3u);
  EXPECT_EQ(m.slots[2].type, SlotType{ValueKind::Integer});
  EXPECT_EQ(t->rows_read(), 0u);
}
