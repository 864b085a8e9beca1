// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "fkb/error.hpp"
#include "fkb/session.hpp"

namespace fkb {

std::size_t rule_complexity(const Rule& rule) {
  std::size_t n = rule.condition ? node_count(*rule.condition) : 0;
  for (const auto& [slot, value] : rule.assignments) n += node_count(*value);
  return n;
}

namespace {

bool is_rule(const Action& a) { return a.kind == ActionKind::BackwardRule || a.kind == ActionKind::ForwardRule; }

class FirstApplicable : public ConflictResolver {
public:
  std::vector<Action> order(std::vector<Action> candidates, const Session&) const override { return candidates; }
};

class MostComplexFirst : public ConflictResolver {
public:
  std::vector<Action> order(std::vector<Action> candidates, const Session&) const override {
    std::stable_sort(candidates.begin(), candidates.end(), [](const Action& a, const Action& b) {
      if (is_rule(a) != is_rule(b)) return is_rule(a);
      if (!is_rule(a)) return false;
      return rule_complexity(*a.rule) > rule_complexity(*b.rule);
    });
    return candidates;
  }
};

class FireFirst : public FirstApplicable {
public:
  bool fire_all_on_change() const override { return false; }
};

}  // namespace

ResolverRegistry ResolverRegistry::with_builtins() {
  ResolverRegistry r;
  r.add("first", std::make_shared<FirstApplicable>());
  r.add("complex", std::make_shared<MostComplexFirst>());
  r.add("fire-first", std::make_shared<FireFirst>());
  return r;
}

void ResolverRegistry::add(const std::string& id, std::shared_ptr<const ConflictResolver> resolver) {
  resolvers_[id] = std::move(resolver);
}

const ConflictResolver& ResolverRegistry::get(const std::string& id) const {
  auto it = resolvers_.find(id);
  if (it == resolvers_.end()) throw Error(Errc::UnknownResolver, "unknown conflict resolver '" + id + "'", {id});
  return *it->second;
}

std::vector<Action> select_actions(const ResolverRegistry& registry, const std::string& resolver_id,
                                   std::vector<Action> candidates, const Session& session) {
  const auto& resolver = registry.get(resolver_id);
  auto ordered = resolver.order(candidates, session);
  // Drop anything the resolver made up or duplicated.
  std::vector<bool> used(candidates.size(), false);
  std::vector<Action> out;
  for (auto& a : ordered) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!used[i] && equal(a, candidates[i])) {
        used[i] = true;
        out.push_back(std::move(a));
        break;
      }
    }
  }
  return out;
}

}  // namespace fkb
