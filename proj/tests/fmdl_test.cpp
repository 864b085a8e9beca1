// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "fkb/error.hpp"
#include "fkb/fmdl.hpp"
#include "fixtures.hpp"

using namespace fkb;
using namespace fkb::fmdl;

namespace {

std::vector<Tok> kinds(std::string_view text) {
  std::vector<Tok> out;
  for (const auto& t : tokenize(text).tokens) out.push_back(t.kind);
  return out;
}

const Diagnostic* find_code(const std::vector<Diagnostic>& ds, std::string_view code) {
  for (const auto& d : ds) {
    if (d.code == code) return &d;
  }
  return nullptr;
}

}  // namespace

TEST(Lexer, Basics) {
  EXPECT_EQ(kinds("frame A {}"), (std::vector<Tok>{Tok::KwFrame, Tok::Ident, Tok::LBrace, Tok::RBrace, Tok::End}));
  EXPECT_EQ(kinds("a := b <> c <= d // tail\n/* block */ >= 1"),
            (std::vector<Tok>{Tok::Ident, Tok::Assign, Tok::Ident, Tok::Ne, Tok::Ident, Tok::Le, Tok::Ident, Tok::Ge,
                              Tok::Int, Tok::End}));
}

TEST(Lexer, StringEscapes) {
  auto r = tokenize(R"("a\"b")");
  ASSERT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(r.tokens[0].kind, Tok::String);
  EXPECT_EQ(r.tokens[0].text, "a\"b");
  EXPECT_EQ(tokenize(R"("a\\b")").tokens[0].text, "a\\b");
  EXPECT_NE(find_code(tokenize(R"("a\nb")").diagnostics, "invalid-escape"), nullptr);
}

TEST(Lexer, IllegalCharacter) {
  auto r = tokenize("@");
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, "illegal-character");
  EXPECT_EQ(r.diagnostics[0].span.line, 1);
  EXPECT_EQ(r.diagnostics[0].span.column, 1);
}

TEST(Lexer, UnterminatedString) {
  auto r = tokenize("frame \"abc");
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, "unterminated-string");
  EXPECT_EQ(r.diagnostics[0].span.column, 7);
}

TEST(Lexer, SpansCountCodePoints) {
  auto r = tokenize("\"\xc3\xa9t\xc3\xa9\" x");
  ASSERT_EQ(r.tokens.size(), 3u);
  EXPECT_EQ(r.tokens[0].span.length, 5);
  EXPECT_EQ(r.tokens[1].span.column, 7);
}

TEST(Parser, F1) {
  auto r = parse(fixtures::kF1);
  ASSERT_TRUE(r.world) << (r.diagnostics.empty() ? "" : r.diagnostics[0].to_string());
  const auto& b = *r.world;
  ASSERT_EQ(b.frames().size(), 3u);
  EXPECT_EQ(b.frames()[0].name, "Thing");
  EXPECT_EQ(b.frames()[1].name, "Box");
  EXPECT_EQ(b.frames()[2].name, "Crate");
  std::vector<const Action*> big;
  for (const auto& a : b.frames()[0].actions) {
    if (a.slot == "big") big.push_back(&a);
  }
  ASSERT_EQ(big.size(), 2u);
  EXPECT_EQ(big[0]->kind, ActionKind::BackwardRule);
  EXPECT_TRUE(big[0]->rule->condition);
  EXPECT_FALSE(big[1]->rule->condition);
  EXPECT_EQ(b.frames()[0].actions.back().kind, ActionKind::AskUser);
  EXPECT_EQ(b.frames()[1].slots[0].default_value, Value::integer(3));
}

TEST(Parser, ConditionTreeMatchesHandBuiltAst) {
  auto r = parse("frame T { slot size: integer; slot big: boolean; big := true if size > 10; }");
  ASSERT_TRUE(r.world);
  const auto& rule = *r.world->frames()[0].actions[0].rule;
  auto expected = expr::binary(ExprOp::Gt, expr::slot("size"), expr::lit(Value::integer(10)));
  EXPECT_TRUE(equal(rule.condition, expected));
  EXPECT_EQ(node_count(*rule.condition), 3u);
  EXPECT_TRUE(equal(rule.assignments[0].second, expr::lit(Value::boolean(true))));
}

TEST(Parser, MissingExpression) {
  auto r = parse("frame T { slot x: integer;\n  x := 1 + ;\n}");
  EXPECT_FALSE(r.world);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, "syntax");
  EXPECT_NE(r.diagnostics[0].message.find("expected expression"), std::string::npos);
  EXPECT_EQ(r.diagnostics[0].span.line, 2);
  EXPECT_EQ(r.diagnostics[0].span.column, 12);
}

TEST(Parser, RecoversAtMemberBoundaries) {
  auto r = parse("frame T {\n  slot x integer;\n  y := ;\n  slot z: integer;\n}\nframe U { bogus }\n");
  EXPECT_FALSE(r.world);
  EXPECT_EQ(r.diagnostics.size(), 3u);
}

TEST(Parser, Precedence) {
  auto e = parse_expression("not a = 1 or b and c < 2 + 3 * -4");
  EXPECT_EQ(format(*e), "not a = 1 or b and c < 2 + 3 * -4");
  EXPECT_EQ(e->op, ExprOp::Or);
  EXPECT_EQ(e->args[0]->op, ExprOp::Not);
  EXPECT_EQ(e->args[1]->op, ExprOp::And);
  auto neg = parse_expression("-5");
  EXPECT_EQ(neg->op, ExprOp::Literal);
  EXPECT_EQ(neg->literal, Value::integer(-5));
  auto wrapped = parse_expression("-(5)");
  EXPECT_EQ(wrapped->op, ExprOp::Neg);
  EXPECT_EQ(format(*wrapped), "-(5)");
  EXPECT_EQ(format(*parse_expression("(a - b) - (c - d)")), "a - b - (c - d)");
  EXPECT_EQ(format(*parse_expression("(a or b) and c")), "(a or b) and c");
  EXPECT_THROW(parse_expression("a = b = c"), Error);
}

TEST(Parser, AllConstructs) {
  constexpr std::string_view src = R"(
extern function hypot_int/2;
remote frame Far : Base at "kb://127.0.0.1:7000/Far";
frame Base {
  slot n: integer default -3;
  slot tags: list of string default ["a", "b"];
  slot who: reference default frame Base;
  constraint n >= -10 and n in [-3, 0, 4];
  rules from "kb://127.0.0.1:7001/Base";
  on n if n > 0 { m := n * 2; tags := []; }
  query m from V.wheels where id = n;
  who := exists c in Base where c.n = 4;
  parent := specialize(Base);
  m := hypot_int(n, 4) if not (n = unknown);
  ask n: "N?";
}
frameset V from table "wheels.csv" key id parent Base;
external frame Clock;
external frame Sensor : Base { slot reading: integer; }
)";
  auto r = parse(src);
  ASSERT_TRUE(r.world) << r.diagnostics[0].to_string();
  const auto& b = *r.world;
  EXPECT_EQ(b.externs().at("hypot_int"), 2);
  EXPECT_EQ(b.find("Far")->kind, FrameKind::RemoteStub);
  EXPECT_EQ(b.find("Far")->url, "kb://127.0.0.1:7000/Far");
  EXPECT_EQ(b.find("V")->kind, FrameKind::Frameset);
  EXPECT_EQ(b.find("V")->key, "id");
  EXPECT_EQ(b.find("V")->parent, "Base");
  EXPECT_EQ(b.find("Clock")->kind, FrameKind::ExternalObject);
  const auto& base = *b.find("Base");
  EXPECT_EQ(base.rules_from, "kb://127.0.0.1:7001/Base");
  EXPECT_EQ(base.actions.size(), 6u);
  EXPECT_EQ(base.actions[0].kind, ActionKind::ForwardRule);
  EXPECT_EQ(base.actions[0].rule->assignments.size(), 2u);
  EXPECT_EQ(base.actions[1].kind, ActionKind::QueryValue);
  EXPECT_EQ(base.slots[2].default_value, Value::reference("Base"));
  // canonical print re-parses to the same build
  auto again = parse(pretty_print(b));
  ASSERT_TRUE(again.world) << again.diagnostics[0].to_string();
  EXPECT_TRUE(equal(b, *again.world));
}

TEST(Parser, ParentIsContextual) {
  auto r = parse("frame P { slot parent_hint: integer; parent := frame P; }");
  ASSERT_TRUE(r.world);
  EXPECT_EQ(r.world->frames()[0].actions[0].slot, "parent");
}

TEST(Parser, KeywordsAreReserved) {
  EXPECT_FALSE(parse("frame slot {}").world);
}

TEST(Validate, F1IsClean) {
  auto r = parse(fixtures::kF1);
  EXPECT_TRUE(validate(*r.world, &r.sources).empty());
}

TEST(Validate, UnknownParent) {
  auto r = parse("frame X : Nowhere {}");
  ASSERT_TRUE(r.world);
  auto ds = validate(*r.world, &r.sources);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].code, "unknown-parent");
  EXPECT_EQ(ds[0].severity, Severity::Error);
  EXPECT_EQ(ds[0].span.column, 7);
}

TEST(Validate, UnknownSlotRefIsWarning) {
  auto r = parse("frame X { slot ok: boolean; ok := true if colour = \"red\"; }");
  ASSERT_TRUE(r.world);
  auto ds = validate(*r.world, &r.sources);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].code, "unknown-slot-ref");
  EXPECT_EQ(ds[0].severity, Severity::Warning);
  EXPECT_NO_THROW(load_source("frame X { slot ok: boolean; ok := true if colour = \"red\"; }"));
}

TEST(Validate, DefaultTypeAndTables) {
  auto r = parse("frame X { slot n: integer default \"abc\"; query n from T.c where k = 1; }");
  ASSERT_TRUE(r.world);
  auto ds = validate(*r.world, &r.sources);
  EXPECT_NE(find_code(ds, "default-type-mismatch"), nullptr);
  EXPECT_NE(find_code(ds, "unknown-table"), nullptr);
  EXPECT_THROW(load_source("frame X { slot n: integer default \"abc\"; }"), Error);
}

TEST(Validate, SpansPointInsideSource) {
  const std::string src = "frame A : B {\n  slot x: integer default true;\n  y := x +;\n}\n@\n";
  auto r = parse(src);
  std::vector<Diagnostic> all = r.diagnostics;
  auto lines = std::count(src.begin(), src.end(), '\n') + 1;
  for (const auto& d : all) {
    EXPECT_GE(d.span.line, 1);
    EXPECT_LE(d.span.line, lines);
    EXPECT_GE(d.span.column, 1);
  }
}

TEST(Load, ErrorsCarryAllDiagnostics) {
  try {
    load_source("frame A { x := ; y := ; }", "bad.fmdl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Syntax);
    ASSERT_EQ(e.details().size(), 2u);
    EXPECT_EQ(e.details()[0].rfind("bad.fmdl:1:", 0), 0u);
  }
}
