// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "fkb/error.hpp"
#include "fkb/eval.hpp"
#include "fkb/fmdl.hpp"
#include "fkb/world.hpp"
#include "fixtures.hpp"

using namespace fkb;
using nlohmann::json;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::BadGoal;
}

FrameDef frame(std::string name, std::optional<std::string> parent = std::nullopt,
               std::vector<SlotDef> slots = {}) {
  FrameDef f;
  f.name = std::move(name);
  f.parent = std::move(parent);
  f.slots = std::move(slots);
  return f;
}

class NoSlots : public EvalContext {
public:
  Value slot(const Expr&) override { return Value::unknown(); }
};

}  // namespace

TEST(Value, MakeValueIdentity) {
  EXPECT_EQ(make_value({ValueKind::Integer}, 4), Value::integer(4));
  EXPECT_EQ(make_value({ValueKind::String}, "x"), Value::string("x"));
  EXPECT_TRUE(make_value({ValueKind::Integer}, nullptr).is_unknown());
}

TEST(Value, MakeValueListReportsOffendingIndex) {
  try {
    make_value(SlotType::list_of(ValueKind::Integer), json::array({1, 2, "x"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TypeMismatch);
    ASSERT_FALSE(e.details().empty());
    EXPECT_EQ(e.details().front(), "2");
  }
}

TEST(Value, NoCrossKindCoercion) {
  EXPECT_EQ(code_of([] { make_value({ValueKind::Boolean}, "true"); }), Errc::TypeMismatch);
  EXPECT_EQ(code_of([] { make_value({ValueKind::Integer}, "4"); }), Errc::TypeMismatch);
}

TEST(Value, HeterogeneousListRejected) {
  EXPECT_EQ(code_of([] { Value::list(ValueKind::Unknown, {Value::integer(1), Value::boolean(true)}); }),
            Errc::TypeMismatch);
}

TEST(Value, EmptyListAdoptsSlotElement) {
  auto v = conform(SlotType::list_of(ValueKind::String), Value::list(ValueKind::Unknown, {}));
  EXPECT_EQ(v.element_kind(), ValueKind::String);
  EXPECT_TRUE(admits(SlotType::list_of(ValueKind::Integer), Value::list(ValueKind::Unknown, {})));
}

TEST(Value, ParseAnswer) {
  EXPECT_EQ(parse_answer({ValueKind::Integer}, "12"), Value::integer(12));
  EXPECT_EQ(parse_answer({ValueKind::Boolean}, "true"), Value::boolean(true));
  EXPECT_TRUE(parse_answer({ValueKind::Integer}, "unknown").is_unknown());
  EXPECT_EQ(code_of([] { parse_answer({ValueKind::Integer}, "abc"); }), Errc::TypeMismatch);
  EXPECT_EQ(parse_answer(SlotType::list_of(ValueKind::Integer), "[1, 2]"),
            Value::list(ValueKind::Integer, {Value::integer(1), Value::integer(2)}));
}

// Random raw inputs never produce a non-homogeneous list.
TEST(Value, MakeValueHomogeneityProperty) {
  std::mt19937 rng(7);
  const ValueKind kinds[] = {ValueKind::Integer, ValueKind::Boolean, ValueKind::String};
  for (int round = 0; round < 500; ++round) {
    json raw = json::array();
    const int n = rng() % 5;
    for (int i = 0; i < n; ++i) {
      switch (rng() % 3) {
        case 0: raw.push_back(static_cast<int>(rng() % 100)); break;
        case 1: raw.push_back(rng() % 2 == 0); break;
        default: raw.push_back("s" + std::to_string(rng() % 10)); break;
      }
    }
    const auto elem = kinds[rng() % 3];
    try {
      auto v = make_value(SlotType::list_of(elem), raw);
      for (const auto& item : v.items()) EXPECT_EQ(item.kind(), elem);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::TypeMismatch);
    }
  }
}

TEST(World, AddFrameAndDuplicates) {
  WorldBuild b;
  b.add_frame(frame("Thing"));
  b.add_frame(frame("Box", "Thing"));
  EXPECT_EQ(b.frames().size(), 2u);
  EXPECT_EQ(b.find("Box")->parent, "Thing");
  EXPECT_EQ(code_of([&] { b.add_frame(frame("Thing")); }), Errc::DuplicateFrame);
  EXPECT_EQ(code_of([&] {
              b.add_frame(frame("X", std::nullopt, {{"a", {ValueKind::Integer}, {}}, {"a", {ValueKind::Integer}, {}}}));
            }),
            Errc::DuplicateSlot);
  EXPECT_EQ(code_of([&] { b.add_frame(frame("Y", std::nullopt, {{"parent", {ValueKind::Reference}, {}}})); }),
            Errc::ReservedSlot);
  EXPECT_EQ(code_of([&] { b.add_frame(frame("9x")); }), Errc::InvalidIdentifier);
}

TEST(World, FreezeDetectsCycle) {
  WorldBuild b;
  b.add_frame(frame("A", "B"));
  b.add_frame(frame("B", "A"));
  try {
    FrameWorld::freeze(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InheritanceCycle);
    EXPECT_EQ(e.details(), (std::vector<std::string>{"A", "B"}));
  }
}

TEST(World, FreezeValidation) {
  WorldBuild unknown_parent;
  unknown_parent.add_frame(frame("X", "Nowhere"));
  EXPECT_EQ(code_of([&] { FrameWorld::freeze(unknown_parent); }), Errc::UnknownParent);

  WorldBuild bad_default;
  bad_default.add_frame(frame("X", std::nullopt, {{"n", {ValueKind::Integer}, Value::string("abc")}}));
  EXPECT_EQ(code_of([&] { FrameWorld::freeze(bad_default); }), Errc::DefaultTypeMismatch);

  WorldBuild bad_constraint;
  auto f = frame("X", std::nullopt, {{"n", {ValueKind::Integer}, {}}});
  f.constraints.push_back(expr::binary(ExprOp::Gt, expr::slot("m"), expr::lit(Value::integer(1))));
  bad_constraint.add_frame(f);
  EXPECT_EQ(code_of([&] { FrameWorld::freeze(bad_constraint); }), Errc::UnknownSlotInConstraint);
}

TEST(World, FreezeIsIdempotent) {
  auto w = fmdl::load_source(fixtures::kF1);
  auto again = FrameWorld::freeze(w->thaw());
  EXPECT_TRUE(*w == *again);
  EXPECT_EQ(w->version(), again->version());
}

TEST(World, Ancestry) {
  auto f1 = fmdl::load_source(fixtures::kF1);
  EXPECT_EQ(ancestry(*f1, "Box"), (std::vector<std::string>{"Box", "Thing"}));

  auto f7 = fmdl::load_source(fixtures::kF7);
  WorkingMemory wm;
  wm.set("Obs", "parent", Value::reference("Bike"));
  EXPECT_EQ(ancestry(*f7, "Obs", &wm), (std::vector<std::string>{"Obs", "Bike", "Vehicle"}));

  WorkingMemory loop;
  loop.set("Thing", "parent", Value::reference("Box"));
  EXPECT_EQ(code_of([&] { ancestry(*f1, "Box", &loop); }), Errc::DynamicInheritanceCycle);
}

TEST(World, SlotLookupShadowing) {
  auto f1 = fmdl::load_source(fixtures::kF1);
  auto big = slot_lookup(*f1, "Box", "big");
  EXPECT_EQ(big.defining_frame, "Thing");
  auto size = slot_lookup(*f1, "Box", "size");
  EXPECT_EQ(size.defining_frame, "Box");
  EXPECT_EQ(size.def->default_value, Value::integer(3));
  EXPECT_EQ(code_of([&] { slot_lookup(*f1, "Box", "color"); }), Errc::UnknownSlot);
  EXPECT_EQ(slot_lookup(*f1, "Box", "parent").def->type.kind, ValueKind::Reference);
}

// A child that does not redeclare a slot sees exactly its parent's definition.
TEST(World, SlotLookupInheritsUnredeclared) {
  auto f7 = fmdl::load_source(fixtures::kF7);
  for (const auto& f : f7->frames()) {
    if (!f.parent) continue;
    for (const auto& s : f7->at(*f.parent).slots) {
      if (f.declares(s.name)) continue;
      auto child = slot_lookup(*f7, f.name, s.name);
      auto parent = slot_lookup(*f7, *f.parent, s.name);
      EXPECT_EQ(child.def, parent.def);
      EXPECT_EQ(child.defining_frame, parent.defining_frame);
    }
  }
}

TEST(World, CheckConstraints) {
  auto f7 = fmdl::load_source(fixtures::kF7);
  WorkingMemory wm;
  EXPECT_TRUE(check_constraints(*f7, "Bike", "wheels", Value::integer(2), wm).empty());
  auto violations = check_constraints(*f7, "Bike", "wheels", Value::integer(3), wm);
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_EQ(format(*violations[0]), "wheels = 2");

  auto two = fmdl::load_source("frame P { slot a: integer; slot b: integer; constraint a < b; }");
  EXPECT_TRUE(check_constraints(*two, "P", "a", Value::integer(5), wm).empty());
}

TEST(Eval, ThreeValuedLogic) {
  NoSlots ctx;
  auto eval = [&](std::string_view text) { return evaluate(*fmdl::parse_expression(text), ctx); };
  EXPECT_EQ(eval("3 > 10"), Value::boolean(false));
  EXPECT_TRUE(eval("u > 10").is_unknown());
  EXPECT_EQ(eval("false and 1 / 0 = 1"), Value::boolean(false));
  EXPECT_EQ(eval("true or 1 / 0 = 1"), Value::boolean(true));
  EXPECT_TRUE(eval("u and true").is_unknown());
  EXPECT_EQ(eval("u and false"), Value::boolean(false));
  EXPECT_EQ(eval("u or true"), Value::boolean(true));
  EXPECT_EQ(eval("not (u = 1) or true"), Value::boolean(true));
}

TEST(Eval, ArithmeticAndErrors) {
  NoSlots ctx;
  auto eval = [&](std::string_view text) { return evaluate(*fmdl::parse_expression(text), ctx); };
  EXPECT_EQ(eval("7 / 2"), Value::integer(3));
  EXPECT_EQ(eval("-7 / 2"), Value::integer(-3));
  EXPECT_EQ(eval("2 + 3 * 4"), Value::integer(14));
  EXPECT_EQ(eval("2 in [1, 2, 3]"), Value::boolean(true));
  EXPECT_EQ(eval("\"b\" < \"c\""), Value::boolean(true));
  EXPECT_EQ(code_of([&] { eval("1 / 0"); }), Errc::EvalError);
  EXPECT_EQ(code_of([&] { eval("1 = \"1\""); }), Errc::EvalError);
  EXPECT_EQ(code_of([&] { eval("9223372036854775807 + 1"); }), Errc::EvalError);
  EXPECT_EQ(code_of([&] { eval("f(1)"); }), Errc::EvalError);
}

TEST(Expr, NodeCount) {
  EXPECT_EQ(node_count(*fmdl::parse_expression("5")), 1u);
  EXPECT_EQ(node_count(*fmdl::parse_expression("a > 0")), 3u);
  EXPECT_EQ(node_count(*fmdl::parse_expression("a + b")), 3u);
  EXPECT_EQ(node_count(*fmdl::parse_expression("a > 0 and b > 0")), 7u);
}
