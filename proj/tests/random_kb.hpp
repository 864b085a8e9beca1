// SPDX-License-Identifier: Apache-2.0
// Random knowledge sources touching every construct of the language, for
// the parse / print / interchange round trips. They are well formed but
// not meant to be consulted.
#pragma once

#include <random>
#include <string>
#include <vector>

namespace fkb::testing {

class RandomKb {
public:
  explicit RandomKb(std::uint32_t seed) : rng_(seed) {}

  std::string source() {
    out_.clear();
    frames_.clear();
    externs_.clear();
    has_set_ = chance(3);
    const int n_externs = pick(3);
    for (int i = 0; i < n_externs; ++i) {
      externs_.push_back({"fn" + std::to_string(i), pick(3)});
      out_ += "extern function " + externs_.back().name + "/" + std::to_string(externs_.back().arity) + ";\n";
    }
    const int n_frames = 1 + pick(5);
    for (int i = 0; i < n_frames; ++i) frame("K" + std::to_string(i));
    if (chance(3)) {
      out_ += "remote frame R0";
      if (chance(2)) out_ += " : " + any_frame();
      out_ += " at \"kb://127.0.0.1:" + std::to_string(7000 + pick(100)) + "/R0\";\n";
    }
    if (has_set_) {
      out_ += "frameset V from table \"t" + std::to_string(pick(9)) + ".csv\" key id";
      if (chance(2)) out_ += " parent " + any_frame();
      out_ += ";\n";
    }
    if (chance(4)) out_ += "external frame X0;\n";
    if (chance(4)) out_ += "external frame X1 : " + any_frame() + " { slot reading: integer; }\n";
    return out_;
  }

private:
  enum Kind { Int, Bool, Str, Ref, IntList, StrList, BoolList };

  struct Slot {
    std::string name;
    Kind kind;
  };
  struct Frame {
    std::string name;
    std::vector<Slot> slots;  // own and inherited
  };
  struct Extern {
    std::string name;
    int arity;
  };

  int pick(int n) { return static_cast<int>(rng_() % static_cast<unsigned>(n)); }
  bool chance(int one_in) { return pick(one_in) == 0; }

  std::string any_frame() { return frames_[pick(static_cast<int>(frames_.size()))].name; }

  static const char* type_name(Kind k) {
    switch (k) {
      case Int: return "integer";
      case Bool: return "boolean";
      case Str: return "string";
      case Ref: return "reference";
      case IntList: return "list of integer";
      case StrList: return "list of string";
      case BoolList: return "list of boolean";
    }
    return "integer";
  }

  std::string int_lit() {
    static const long long pool[] = {0, 1, -1, 2, 7, -13, 42, 1000000, -999999};
    return std::to_string(pool[pick(9)]);
  }

  std::string str_lit() {
    static const char* pool[] = {"", "a", "two words", "q\\\"uote", "back\\\\slash", "x-y_z", "Ünïcode"};
    return std::string("\"") + pool[pick(7)] + "\"";
  }

  std::string literal(Kind k) {
    switch (k) {
      case Int: return int_lit();
      case Bool: return chance(2) ? "true" : "false";
      case Str: return str_lit();
      case Ref: return "frame " + any_frame();
      case IntList: return list_of(Int);
      case StrList: return list_of(Str);
      case BoolList: return list_of(Bool);
    }
    return "0";
  }

  std::string list_of(Kind k) {
    std::string s = "[";
    const int n = pick(4);
    for (int i = 0; i < n; ++i) s += (i ? ", " : "") + literal(k);
    return s + "]";
  }

  std::vector<const Slot*> slots_of(const Frame& f, Kind k) const {
    std::vector<const Slot*> out;
    for (const auto& s : f.slots) {
      if (s.kind == k) out.push_back(&s);
    }
    return out;
  }

  std::string ref_to(const Frame& f, Kind k) {
    auto own = slots_of(f, k);
    if (!own.empty() && !chance(4)) return own[pick(static_cast<int>(own.size()))]->name;
    // qualified read from some earlier frame
    for (int tries = 0; tries < 3; ++tries) {
      const auto& other = frames_[pick(static_cast<int>(frames_.size()))];
      auto theirs = slots_of(other, k);
      if (!theirs.empty()) return other.name + "." + theirs[pick(static_cast<int>(theirs.size()))]->name;
    }
    return literal(k);
  }

  std::string expr(const Frame& f, Kind k, int depth) {
    if (depth <= 0) return chance(2) ? literal(k) : ref_to(f, k);
    switch (k) {
      case Int:
        switch (pick(7)) {
          case 0: return literal(Int);
          case 1: return ref_to(f, Int);
          case 2: return expr(f, Int, depth - 1) + " + " + expr(f, Int, depth - 1);
          case 3: return paren(expr(f, Int, depth - 1)) + " * " + paren(expr(f, Int, depth - 1));
          case 4: return "-" + paren(expr(f, Int, depth - 1));
          case 5: return paren(expr(f, Int, depth - 1)) + " - " + paren(expr(f, Int, depth - 1));
          default: {
            if (externs_.empty()) return expr(f, Int, depth - 1) + " / " + literal(Int);
            const auto& e = externs_[pick(static_cast<int>(externs_.size()))];
            std::string call = e.name + "(";
            for (int i = 0; i < e.arity; ++i) call += (i ? ", " : "") + expr(f, Int, depth - 1);
            return call + ")";
          }
        }
      case Bool:
        switch (pick(9)) {
          case 0: return literal(Bool);
          case 1: return ref_to(f, Bool);
          case 2: return expr(f, Int, depth - 1) + " " + cmp() + " " + expr(f, Int, depth - 1);
          case 3: return paren(expr(f, Bool, depth - 1)) + " and " + paren(expr(f, Bool, depth - 1));
          case 4: return paren(expr(f, Bool, depth - 1)) + " or " + paren(expr(f, Bool, depth - 1));
          case 5: return "not " + paren(expr(f, Bool, depth - 1));
          case 6: return expr(f, Int, depth - 1) + " in " + list_of(Int);
          case 7: return ref_to(f, Int) + " = unknown";
          default: return expr(f, Str, depth - 1) + (chance(2) ? " = " : " <> ") + str_lit();
        }
      case Str: return chance(2) ? literal(Str) : ref_to(f, Str);
      case Ref:
        switch (pick(3)) {
          case 0: return "specialize(" + any_frame() + ")";
          case 1: {
            const auto root = any_frame();
            return "exists c in " + root + " where " + paren(expr(f, Bool, depth - 1));
          }
          default: return chance(2) ? literal(Ref) : ref_to(f, Ref);
        }
      default: return literal(k);
    }
  }

  std::string cmp() {
    static const char* ops[] = {"=", "<>", "<", "<=", ">", ">="};
    return ops[pick(6)];
  }

  static std::string paren(const std::string& e) { return "(" + e + ")"; }

  void frame(const std::string& name) {
    Frame f{name, {}};
    out_ += "frame " + name;
    if (!frames_.empty() && chance(2)) {
      const auto& parent = frames_[pick(static_cast<int>(frames_.size()))];
      out_ += " : " + parent.name;
      f.slots = parent.slots;
    }
    out_ += " {\n";
    frames_.push_back(f);
    auto& self = frames_.back();
    const int n_slots = pick(5);
    for (int i = 0; i < n_slots; ++i) {
      Slot s{"s" + std::to_string(pick(8)), static_cast<Kind>(pick(7))};
      bool clash = false;
      for (const auto& other : self.slots) clash |= other.name == s.name;
      if (clash) continue;  // redeclaring with another type is not what this is about
      self.slots.push_back(s);
      out_ += "  slot " + s.name + ": " + type_name(s.kind);
      if (chance(2)) out_ += " default " + literal(s.kind);
      out_ += ";\n";
    }
    if (self.slots.empty()) {
      out_ += "}\n";
      return;
    }
    const int members = pick(7);
    for (int i = 0; i < members; ++i) {
      const auto& target = self.slots[pick(static_cast<int>(self.slots.size()))];
      switch (pick(8)) {
        case 0:
        case 1:
          out_ += "  " + target.name + " := " + expr(self, target.kind, 2);
          if (chance(2)) out_ += " if " + expr(self, Bool, 2);
          out_ += ";\n";
          break;
        case 2: {
          out_ += "  on " + target.name;
          if (chance(2)) out_ += " if " + expr(self, Bool, 1);
          out_ += " {";
          const int n = 1 + pick(2);
          for (int k = 0; k < n; ++k) {
            const auto& set = self.slots[pick(static_cast<int>(self.slots.size()))];
            out_ += " " + set.name + " := " + expr(self, set.kind, 1) + ";";
          }
          out_ += " }\n";
          break;
        }
        case 3: out_ += "  constraint " + expr(self, Bool, 2) + ";\n"; break;
        case 4: out_ += "  ask " + target.name + ": " + str_lit() + ";\n"; break;
        case 5: out_ += "  rules from \"kb://127.0.0.1:7001/" + name + "\";\n"; break;
        case 6:
          if (has_set_ && (target.kind == Int || target.kind == Str || target.kind == IntList)) {
            out_ += "  query " + target.name + " from V.col where code " + cmp() + " " + expr(self, Int, 1) + ";\n";
          }
          break;
        default: out_ += "  parent := specialize(" + any_frame() + ");\n"; break;
      }
    }
    out_ += "}\n";
  }

  std::mt19937 rng_;
  std::string out_;
  std::vector<Frame> frames_;
  std::vector<Extern> externs_;
  bool has_set_ = false;
};

}  // namespace fkb::testing
