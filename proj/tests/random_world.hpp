// SPDX-License-Identifier: Apache-2.0
// Small random knowledge bases plus a direct evaluator for them.
//
// Frames form a forest; every root declares the integer slots a..d. A rule
// for slot k only reads slots before k, so there are no dependency cycles
// and plain recursion gives the expected answer.
#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fkb/value.hpp"

namespace fkb::testing {

inline constexpr int kSlots = 4;

inline std::string slot_name(int i) { return std::string(1, static_cast<char>('a' + i)); }

struct Term {
  bool is_slot = false;
  int slot = 0;
  std::int64_t literal = 0;
};

struct RRule {
  int target = 0;
  Term lhs;
  char op = 0;  // 0 = lhs only, otherwise + or -
  Term rhs;
  bool has_cond = false;
  Term cl;
  char cmp = '>';  // > < =
  Term cr;
};

struct RFrame {
  std::string name;
  int parent = -1;
  std::map<int, std::optional<std::int64_t>> decls;  // slot -> default
  std::vector<RRule> rules;
  std::vector<int> asks;
};

struct RWorld {
  std::vector<RFrame> frames;

  std::string fmdl() const {
    std::string out;
    for (const auto& f : frames) {
      out += "frame " + f.name;
      if (f.parent >= 0) out += " : " + frames[f.parent].name;
      out += " {\n";
      for (const auto& [s, d] : f.decls) {
        out += "  slot " + slot_name(s) + ": integer";
        if (d) out += " default " + std::to_string(*d);
        out += ";\n";
      }
      for (const auto& r : f.rules) {
        out += "  " + slot_name(r.target) + " := " + term(r.lhs);
        if (r.op) out += std::string(" ") + r.op + " " + term(r.rhs);
        if (r.has_cond) out += " if " + term(r.cl) + " " + r.cmp + " " + term(r.cr);
        out += ";\n";
      }
      for (int s : f.asks) out += "  ask " + slot_name(s) + ": \"Enter " + slot_name(s) + "\";\n";
      out += "}\n";
    }
    return out;
  }

  /// Expected value of `slot` for `origin`; nullopt is Unknown.
  std::optional<std::int64_t> eval(int origin, int slot) const {
    std::vector<int> chain;
    for (int f = origin; f >= 0; f = frames[f].parent) chain.push_back(f);
    for (int level : chain) {
      for (const auto& r : frames[level].rules) {
        if (r.target != slot) continue;
        if (r.has_cond) {
          auto l = value(origin, r.cl);
          auto rr = value(origin, r.cr);
          if (!l || !rr) continue;
          bool ok = r.cmp == '>' ? *l > *rr : r.cmp == '<' ? *l < *rr : *l == *rr;
          if (!ok) continue;
        }
        auto l = value(origin, r.lhs);
        if (!l) continue;
        if (r.op) {
          auto rv = value(origin, r.rhs);
          if (!rv) continue;
          return r.op == '+' ? *l + *rv : *l - *rv;
        }
        return l;
      }
      if (auto it = frames[level].decls.find(slot); it != frames[level].decls.end()) return it->second;
    }
    return std::nullopt;
  }

private:
  static std::string term(const Term& t) { return t.is_slot ? slot_name(t.slot) : std::to_string(t.literal); }

  std::optional<std::int64_t> value(int origin, const Term& t) const {
    if (!t.is_slot) return t.literal;
    return eval(origin, t.slot);
  }
};

/// At most 4 frames and 6 rules. With `asks`, roots may ask for slot a.
inline RWorld random_world(std::mt19937& rng, bool asks = false) {
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  RWorld w;
  const int n = 1 + pick(4);
  for (int i = 0; i < n; ++i) {
    RFrame f;
    f.name = std::string("F") + std::to_string(i);
    f.parent = i == 0 || pick(4) == 0 ? -1 : pick(i);
    for (int s = 0; s < kSlots; ++s) {
      if (f.parent < 0 || pick(4) == 0) {
        std::optional<std::int64_t> d;
        if (pick(2) == 0) d = pick(7) - 1;
        f.decls[s] = d;
      }
    }
    if (asks && f.parent < 0 && pick(2) == 0) f.asks.push_back(0);
    w.frames.push_back(std::move(f));
  }
  auto term_before = [&](int target) {
    Term t;
    if (target > 0 && pick(3) != 0) {
      t.is_slot = true;
      t.slot = pick(target);
    } else {
      t.literal = pick(9) - 2;
    }
    return t;
  };
  const int rules = pick(7);
  for (int i = 0; i < rules; ++i) {
    RRule r;
    r.target = pick(kSlots);
    r.lhs = term_before(r.target);
    if (pick(2) == 0) {
      r.op = pick(2) == 0 ? '+' : '-';
      r.rhs = term_before(r.target);
    }
    if (pick(3) != 0) {
      r.has_cond = true;
      r.cl = term_before(r.target);
      r.cmp = "><="[pick(3)];
      r.cr = term_before(r.target);
    }
    w.frames[pick(n)].rules.push_back(r);
  }
  return w;
}

}  // namespace fkb::testing
