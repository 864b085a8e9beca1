// SPDX-License-Identifier: Apache-2.0
// Knowledge sources shared by the test suites.
#pragma once

#include <string_view>

namespace fkb::fixtures {

inline constexpr std::string_view kF1 = R"(frame Thing {
  slot size: integer;
  slot big: boolean;
  big := true if size > 10;
  big := false;
  ask size: "Enter size";
}
frame Box : Thing { slot size: integer default 3; }
frame Crate : Thing { slot size: integer default 20; }
)";

// x := 5 declared before the more complex alternative.
inline constexpr std::string_view kF2 = R"(frame C {
  slot x: integer;
  slot a: integer default 1;
  x := 5;
  x := 10 if a > 0;
}
)";

inline constexpr std::string_view kF3 = R"(frame S {
  slot speed: integer;
  slot alert: boolean default false;
  on speed if speed > 100 { alert := true; }
}
)";

inline constexpr std::string_view kF4 = R"(frame C {
  slot p: integer;
  slot q: integer;
  p := q + 1;
  q := p + 1;
}
)";

inline constexpr std::string_view kF7 = R"(frame Vehicle {
  slot wheels: integer;
  slot kind: string;
  ask wheels: "How many wheels?";
}
frame Bike : Vehicle {
  constraint wheels = 2;
  kind := "bike";
}
frame Car : Vehicle {
  constraint wheels = 4;
  kind := "car";
}
frame Obs : Vehicle {
  slot wheels: integer default 2;
  parent := specialize(Vehicle);
}
)";

inline constexpr std::string_view kAnimal = R"(frame Animal {
  slot legs: integer;
  slot biped: reference;
  slot tripod: reference;
  biped := exists c in Animal where c.legs = 2;
  tripod := exists c in Animal where c.legs = 7;
}
frame Dog : Animal { slot legs: integer default 4; }
frame Bird : Animal { slot legs: integer default 2; }
)";

// Parent-level rule reads a slot that the child overrides; the child-driven
// answer differs from what the parent's own value would give.
inline constexpr std::string_view kF1Split = R"(frame Thing {
  slot size: integer default 50;
  slot big: boolean;
  big := true if size > 10;
  big := false;
}
frame Box : Thing { slot size: integer default 3; }
)";

inline constexpr std::string_view kCascade = R"(frame L {
  slot a: integer;
  slot b: integer;
  on a { b := a + 1; }
  on b { a := b + 1; }
}
)";

}  // namespace fkb::fixtures
