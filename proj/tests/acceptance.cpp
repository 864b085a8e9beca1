// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit
// status is the number of failed criteria.
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "cluster.hpp"
#include "corpus.hpp"
#include "fixtures.hpp"
#include "fkb/cli.hpp"
#include "fkb/distribution.hpp"
#include "fkb/error.hpp"
#include "fkb/fmdl.hpp"
#include "fkb/interchange.hpp"
#include "fkb/service.hpp"
#include "fkb/session.hpp"
#include "random_kb.hpp"
#include "random_world.hpp"

namespace fs = std::filesystem;
using namespace fkb;
using namespace fkb::testing;

namespace {

/// Collects failed expectations of one criterion.
struct Check {
  std::vector<std::string> failures;
  int checks = 0;
  void need(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
};

fs::path scratch(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("fkb_accept_" + std::to_string(::getpid()) + "_" + tag);
  fs::create_directories(dir);
  return dir;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::BadGoal;
}

bool round_trips(const std::string& source, std::string& why) {
  auto parsed = fmdl::parse(source);
  if (!parsed.world) {
    why = parsed.diagnostics.empty() ? "parse failed" : parsed.diagnostics[0].to_string();
    return false;
  }
  auto diags = fmdl::validate(*parsed.world, &parsed.sources);
  if (fmdl::has_errors(diags)) {
    why = diags[0].to_string();
    return false;
  }
  const auto& build = *parsed.world;
  const auto doc = interchange::world_to_xml(build);
  const auto back = interchange::world_from_xml(doc);
  if (!equal(build, back) || interchange::world_to_xml(back) != doc) {
    why = "xml round trip differs";
    return false;
  }
  const auto printed = fmdl::pretty_print(build);
  auto reparsed = fmdl::parse(printed);
  if (!reparsed.world || !equal(build, *reparsed.world) || fmdl::pretty_print(*reparsed.world) != printed) {
    why = "pretty-print law broken";
    return false;
  }
  if (interchange::world_to_xml(*FrameWorld::freeze(build)) != doc) {
    why = "frozen world exports differently";
    return false;
  }
  return true;
}

std::unique_ptr<Session> session_for(std::string_view source, SessionOptions options = {}) {
  static std::vector<std::shared_ptr<SessionFactory>> keep;
  keep.push_back(std::make_shared<SessionFactory>(fmdl::load_source(source), options));
  return keep.back()->create();
}

// ---- criteria ------------------------------------------------------------------------------

void round_trip_criterion(Check& c) {
  const auto corpus = fkb::testing::corpus();
  c.need(corpus.size() >= 20, "corpus has " + std::to_string(corpus.size()) + " sources");
  for (const auto& [name, source] : corpus) {
    std::string why;
    c.need(round_trips(source, why), name + ": " + why);
  }
  int random = 0;
  for (std::uint32_t seed = 1; seed <= 250; ++seed) {
    RandomKb gen(seed);
    std::string why;
    c.need(round_trips(gen.source(), why), "random#" + std::to_string(seed) + ": " + why);
    ++random;
  }
  c.need(random >= 200, "too few random sources");
}

void engine_criterion(Check& c) {
  {
    auto s = session_for(fixtures::kF1);
    c.need(s->infer("Box", "big").value == Value::boolean(false), "F1 Box.big");
    c.need(s->infer("Crate", "big").value == Value::boolean(true), "F1 Crate.big");
  }
  {
    // Thing.big: asks size, 12 gives true, with a fixed trace
    auto s = session_for(fixtures::kF1);
    auto r = s->infer("Thing", "big");
    c.need(r.outcome == Outcome::Suspended && r.question && r.question->id == "q1" && r.question->slot == "size" &&
               r.question->prompt == "Enter size",
           "F1 Thing.big question");
    if (r.outcome == Outcome::Suspended) {
      auto done = s->answer("q1", Value::integer(12));
      c.need(done.value == Value::boolean(true), "F1 Thing.big after 12");
    }
    struct Step {
      TraceKind kind;
      const char* frame;
      const char* slot;
      const char* source;
    };
    const std::vector<Step> golden = {
        {TraceKind::GoalPushed, "Thing", "big", ""},          {TraceKind::RuleTried, "Thing", "big", "Thing#0"},
        {TraceKind::GoalPushed, "Thing", "size", ""},         {TraceKind::QuestionEmitted, "Thing", "size", ""},
        {TraceKind::AnswerReceived, "Thing", "size", ""},     {TraceKind::ValueAssigned, "Thing", "size", "answer"},
        {TraceKind::GoalPushed, "Thing", "big", ""},          {TraceKind::RuleTried, "Thing", "big", "Thing#0"},
        {TraceKind::RuleFired, "Thing", "big", "Thing#0"},    {TraceKind::ValueAssigned, "Thing", "big", "Thing#0"},
    };
    const auto& trace = s->trace();
    bool same = trace.size() == golden.size();
    for (std::size_t i = 0; same && i < golden.size(); ++i) {
      same = trace[i].seq == i + 1 && trace[i].kind == golden[i].kind && trace[i].frame == golden[i].frame &&
             trace[i].slot == golden[i].slot && trace[i].source == golden[i].source;
    }
    c.need(same, "Thing.big golden trace");
  }
  {
    auto s = session_for(fixtures::kF2);
    c.need(s->infer("C", "x").value == Value::integer(5), "F2 x");
  }
  {
    auto s = session_for(fixtures::kF3);
    s->assign("S", "speed", Value::integer(120));
    c.need(s->infer("S", "alert").value == Value::boolean(true), "F3 speed 120");
    auto t = session_for(fixtures::kF3);
    t->assign("S", "speed", Value::integer(50));
    c.need(t->infer("S", "alert").value == Value::boolean(false), "F3 speed 50");
  }
  {
    auto s = session_for(fixtures::kF4);
    c.need(s->infer("C", "p").outcome == Outcome::Unknown, "F4 p");
    c.need(s->infer("C", "q").outcome == Outcome::Unknown, "F4 q");
  }
  {
    auto s = session_for(fixtures::kF7);
    c.need(s->specify_frame("Obs", "Vehicle") == Value::reference("Bike"), "F7 specify");
    c.need(s->infer("Obs", "kind").value == Value::string("bike"), "F7 Obs.kind");
    auto t = session_for(fixtures::kF7);
    auto r = t->infer("Bike", "wheels");
    if (r.outcome == Outcome::Suspended) {
      c.need(code_of([&] { t->answer(r.question->id, Value::integer(3)); }) == Errc::ConstraintViolation,
             "F7 wheels 3 rejected");
      c.need(t->answer(r.question->id, Value::integer(2)).value == Value::integer(2), "F7 wheels 2");
    } else {
      c.need(false, "F7 Bike.wheels did not ask");
    }
  }
  {
    auto s = session_for(fixtures::kAnimal);
    c.need(s->infer("Animal", "biped").value == Value::reference("Bird"), "Animal biped");
    c.need(s->infer("Animal", "tripod").outcome == Outcome::Unknown, "Animal tripod");
  }
  std::mt19937 rng(4242);
  int worlds = 0;
  for (; worlds < 150; ++worlds) {
    auto rw = random_world(rng);
    const auto src = rw.fmdl();
    SessionFactory factory(fmdl::load_source(src));
    for (std::size_t f = 0; f < rw.frames.size(); ++f) {
      for (int slot = 0; slot < kSlots; ++slot) {
        auto got = factory.create()->infer(rw.frames[f].name, slot_name(slot));
        auto want = rw.eval(static_cast<int>(f), slot);
        c.need(want ? got.value == Value::integer(*want) : got.outcome == Outcome::Unknown,
               "oracle disagrees on " + rw.frames[f].name + "." + slot_name(slot) + " in\n" + src);
      }
    }
  }
}

void polymorphism_criterion(Check& c) {
  auto local = session_for(fixtures::kF1Split);
  c.need(local->infer("Box", "big").value == Value::boolean(false), "local Box.big");
  c.need(local->infer("Thing", "big").value == Value::boolean(true), "local Thing.big");
  Cluster cluster(build_of(fixtures::kF1Split), {{"Thing", 0}, {"Box", 1}}, 2);
  c.need(cluster.session(1)->infer("Box", "big").value == Value::boolean(false), "remote Box.big");
  c.need(cluster.session(1)->infer("Thing", "big").value == Value::boolean(true), "remote Thing.big");
}

void transparent(Check& c, const WorldBuild& w, const std::map<std::string, std::size_t>& a, std::size_t nodes,
                 const std::vector<std::string>& expected) {
  Cluster cluster(w, a, nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    c.need(consult_all([&] { return cluster.session(k); }, w) == expected,
           "partition " + describe(a) + "differs on node " + std::to_string(k));
  }
}

void transparency_criterion(Check& c) {
  for (auto src : {fixtures::kF1, fixtures::kF7}) {
    auto w = build_of(src);
    const auto expected = monolithic(w);
    for (const auto& a : all_assignments(frame_names(w), 2)) transparent(c, w, a, 2, expected);
    std::vector<std::map<std::string, std::size_t>> spread;
    for (const auto& a : all_assignments(frame_names(w), 3)) {
      std::set<std::size_t> used;
      for (const auto& [f, n] : a) used.insert(n);
      if (used.size() == 3) spread.push_back(a);
    }
    const std::size_t stride = std::max<std::size_t>(1, spread.size() / 6);
    int three = 0;
    for (std::size_t i = 0; i < spread.size(); i += stride, ++three) transparent(c, w, spread[i], 3, expected);
    c.need(three >= 5, "only " + std::to_string(three) + " three-node partitions");
  }
}

void caching_criterion(Check& c) {
  Cluster cluster(build_of(fixtures::kF1), {{"Thing", 0}, {"Box", 1}, {"Crate", 1}}, 2);
  auto s = cluster.session(1);
  auto* backend = dynamic_cast<net::ClientBackend*>(s->remote_backend());
  if (!backend) {
    c.need(false, "no client backend");
    return;
  }
  backend->prepare(cluster.node(0).url("Thing"));
  const auto before = cluster.node(1).client().stats();
  c.need(s->infer("Box", "big").value == Value::boolean(false), "F5 Box.big");
  const auto first = delta(cluster.node(1).client().stats(), before);
  c.need(first.total() == 4, "first query took " + std::to_string(first.total()) + " messages");
  const auto mid = cluster.node(1).client().stats();
  c.need(s->infer("Box", "big").value == Value::boolean(false), "F5 Box.big again");
  const auto again = delta(cluster.node(1).client().stats(), mid);
  c.need(again.total() == 0, "repeat took " + std::to_string(again.total()) + " messages");
  c.need(s->counters().cache_hits == 1, "cache hit not counted");
}

void remote_rules_criterion(Check& c) {
  net::Instance repo;
  repo.start(fmdl::load_source(fixtures::kF1));
  const auto url = repo.url("Thing");
  net::Instance local;
  local.start(fmdl::load_source("frame Thing {\n  slot size: integer;\n  slot big: boolean;\n  rules from \"" + url +
                                "\";\n}\nframe Box : Thing { slot size: integer default 3; }\n"
                                "frame Crate : Thing { slot size: integer default 20; }\n"));
  SessionFactory mono(fmdl::load_source(fixtures::kF1));
  for (int round = 0; round < 2; ++round) {
    auto s = local.factory().create();
    for (auto frame : {"Box", "Crate"}) {
      c.need(s->infer(frame, "big").value == mono.create()->infer(frame, "big").value,
             std::string(frame) + ".big differs from local rules");
    }
    c.need(s->counters().rules_fetched == 1,
           "session fetched rules " + std::to_string(s->counters().rules_fetched) + " times");
  }
}

class Inventor : public ConflictResolver {
public:
  std::vector<Action> order(std::vector<Action> in, const Session&) const override {
    auto out = in;
    out.insert(out.end(), in.begin(), in.end());
    out.push_back(Action::ask("made_up", "?"));
    return out;
  }
};

void resolver_criterion(Check& c) {
  c.need(session_for(fixtures::kF2)->infer("C", "x").value == Value::integer(5), "F2 first");
  c.need(session_for(fixtures::kF2, SessionOptions{100, "complex", false})->infer("C", "x").value ==
             Value::integer(10),
         "F2 complex");

  constexpr std::string_view kTwo = R"(frame C {
  slot x: integer;
  slot a: integer default 1;
  x := 5;
  x := 10 if a > 0;
}
frame D {
  slot x: integer;
  slot a: integer default 1;
  x := 5;
  x := 10 if a > 0;
}
)";
  SessionFactory two(fmdl::load_source(kTwo));
  two.assign_resolver("D", "complex");
  auto s = two.create();
  c.need(s->infer("C", "x").value == Value::integer(5), "C under first");
  c.need(s->infer("D", "x").value == Value::integer(10), "D under complex");

  SessionFactory factory(fmdl::load_source(R"(frame C { slot x: integer; slot a: integer;
    x := 1; x := 2 if a > 0; x := a * 2 + 1 if a > 0 and a < 9; ask x: "x?"; x := 3; })"));
  auto session = factory.create();
  auto registry = ResolverRegistry::with_builtins();
  registry.add("inventor", std::make_shared<Inventor>());
  const auto& acts = factory.world()->find("C")->actions;
  std::mt19937 rng(7);
  for (int round = 0; round < 200; ++round) {
    std::vector<Action> input;
    for (const auto& a : acts) {
      if (rng() % 2) input.push_back(a);
      if (rng() % 5 == 0) input.push_back(a);
    }
    std::shuffle(input.begin(), input.end(), rng);
    for (const auto* id : {"first", "complex", "fire-first", "inventor"}) {
      auto out = select_actions(registry, id, input, *session);
      std::vector<bool> used(input.size(), false);
      bool sub = true;
      for (const auto& a : out) {
        bool matched = false;
        for (std::size_t i = 0; i < input.size() && !matched; ++i) {
          if (!used[i] && equal(a, input[i])) used[i] = matched = true;
        }
        sub &= matched;
      }
      c.need(sub, std::string(id) + " output is not a sub-permutation");
      if (std::string(id) != "inventor") c.need(out.size() == input.size(), std::string(id) + " dropped actions");
    }
  }
}

void termination_criterion(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = session_for(fixtures::kF4)->infer("C", "p");
  const auto took = std::chrono::steady_clock::now() - t0;
  c.need(r.outcome == Outcome::Unknown, "F4 not unknown");
  c.need(took < std::chrono::seconds(1), "F4 took too long");

  SessionFactory factory(fmdl::load_source(fixtures::kCascade));
  std::vector<std::vector<TraceEvent>> traces;
  for (int i = 0; i < 2; ++i) {
    auto s = factory.create();
    c.need(code_of([&] { s->assign("L", "a", Value::integer(1)); }) == Errc::CascadeLimitExceeded,
           "cascade limit not raised");
    c.need(s->counters().rules_fired == 100, "cascade fired " + std::to_string(s->counters().rules_fired));
    traces.push_back(s->trace());
  }
  c.need(traces[0] == traces[1], "cascade traces differ");
}

void frameset_criterion(Check& c) {
  const auto dir = scratch("frameset");
  {
    std::ofstream csv(dir / "parts.csv");
    csv << "id,name,price\n";
    for (int i = 1; i <= 100; ++i) csv << i << ",part" << i << "," << (i * 7) % 50 << "\n";
  }
  SessionFactory factory(fmdl::load_source(R"(frame Part { slot note: string; note := "stock"; }
frameset P from table "parts.csv" key id parent Part;
)",
                                           "<parts>", dir));
  auto s = factory.create();
  c.need(s->children("Part").size() == 100, "children of Part");
  c.need(s->counters().rows_read == 0, "rows read before any query");
  c.need(s->infer("P_5", "price").value == Value::integer(35), "P_5.price");
  c.need(s->infer("P_50", "name").value == Value::string("part50"), "P_50.name");
  c.need(s->infer("P_100", "note").value == Value::string("stock"), "P_100.note");
  c.need(s->counters().rows_read <= 4, "read " + std::to_string(s->counters().rows_read) + " rows");

  std::ofstream(dir / "wheels.csv") << "id,name,wheels\n1,trike,3\n2,car,4\n3,bus,6\n";
  SessionFactory wheels(fmdl::load_source("frame Base { slot label: string; }\n"
                                          "frameset V from table \"wheels.csv\" key id parent Base;\n",
                                          "<wheels>", dir));
  auto q = wheels.create();
  c.need(q->query_value("V", "wheels", "name", ExprOp::Eq, Value::string("ship")).is_unknown(), "no match");
  c.need(q->query_value("V", "wheels", "name", ExprOp::Eq, Value::string("trike")) == Value::integer(3),
         "one match");
  c.need(q->query_value("V", "wheels", "wheels", ExprOp::Gt, Value::integer(3)) ==
             Value::list(ValueKind::Integer, {Value::integer(4), Value::integer(6)}),
         "many matches");
  fs::remove_all(dir);
}

struct CliRun {
  int code;
  std::string out;
};

CliRun fkb(const std::vector<std::string>& args) {
  std::istringstream in;
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str()};
}

void sessions_criterion(Check& c) {
  const auto dir = scratch("sessions");
  const auto src = (dir / "p.fmdl").string();
  std::ofstream(src) << R"(frame P {
  slot a: integer;
  slot b: integer;
  slot s: integer;
  ask a: "a?";
  ask b: "b?";
  s := a + b;
}
)";
  const auto snap = (dir / "s.xml").string();
  auto full = fkb({"consult", src, "--goal", "P.s", "--answers", "a=1,b=2", "--json"});
  auto first = fkb({"consult", src, "--goal", "P.s", "--answers", "a=1", "--json", "--snapshot-out", snap});
  auto rest = fkb({"consult", src, "--resume", snap, "--answers", "b=2", "--json"});
  c.need(full.code == 0 && first.code == 1 && rest.code == 0, "cli exit codes");
  c.need(!full.out.empty() && rest.out == full.out, "resumed --json output differs");

  // every suspension hopped through a snapshot
  std::mt19937 rng(555);
  for (int round = 0; round < 30; ++round) {
    auto rw = random_world(rng, true);
    SessionFactory factory(fmdl::load_source(rw.fmdl()));
    for (const auto& f : rw.frames) {
      for (int slot = 0; slot < kSlots; ++slot) {
        std::vector<TraceEvent> traces[2];
        Value results[2];
        for (int hop = 0; hop < 2; ++hop) {
          auto s = factory.create();
          auto r = s->infer(f.name, slot_name(slot));
          while (r.outcome == Outcome::Suspended) {
            if (hop) s = Session::restore(factory, s->snapshot());
            r = s->answer(s->pending()->id, Value::integer(3));
          }
          traces[hop] = s->trace();
          results[hop] = r.value;
        }
        c.need(traces[0] == traces[1] && results[0] == results[1], "snapshot hop changed " + f.name);
      }
    }
  }

  using service::json;
  auto call = [](service::ConsultService& svc, const std::string& method, const std::string& path,
                 const json& body = {}) {
    auto r = svc.handle({method, path, {}, body.is_null() ? "" : body.dump()});
    return std::make_pair(r.status, r.body.empty() ? json() : json::parse(r.body));
  };
  auto replay = [&] {
    service::ConsultService svc(std::make_shared<SessionFactory>(fmdl::load_source(fixtures::kF7)));
    auto [st, step] = call(svc, "POST", "/api/sessions", {{"goal", "Bike.wheels"}});
    const auto id = step["session"].get<std::string>();
    const auto qid = step["question"]["id"];
    call(svc, "POST", "/api/sessions/" + id + "/answers", {{"question_id", qid}, {"value", 3}});
    call(svc, "POST", "/api/sessions/" + id + "/answers", {{"question_id", qid}, {"value", 2}});
    return call(svc, "GET", "/api/sessions/" + id + "/trace").second["events"];
  };
  auto a = replay();
  c.need(!a.empty() && a == replay(), "replayed transcript differs");

  service::ConsultService svc(std::make_shared<SessionFactory>(fmdl::load_source(fixtures::kF1)));
  std::vector<json> started;
  for (int i = 0; i < 4; ++i) started.push_back(call(svc, "POST", "/api/sessions", {{"goal", "Thing.big"}}).second);
  for (int i : {2, 0, 3, 1}) {
    auto [st, done] = call(svc, "POST", "/api/sessions/" + started[i]["session"].get<std::string>() + "/answers",
                           {{"question_id", started[i]["question"]["id"]}, {"value", i % 2 ? 5 : 50}});
    c.need(st == 200 && done["result"]["value"] == (i % 2 == 0), "interleaved session " + std::to_string(i));
  }
  for (int i = 0; i < 4; ++i) {
    auto events = call(svc, "GET", "/api/sessions/" + started[i]["session"].get<std::string>() + "/trace")
                      .second["events"];
    for (const auto& e : events) {
      if (e["kind"] == "answer_received") c.need(e["value"] == (i % 2 ? 5 : 50), "answer leaked between sessions");
    }
  }
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"round trips (corpus, pretty-print law, random sources)", round_trip_criterion},
      {"engine values, golden trace, oracle", engine_criterion},
      {"polymorphism locally and across the wire", polymorphism_criterion},
      {"distribution transparency", transparency_criterion},
      {"stub caching message counts", caching_criterion},
      {"remote rules", remote_rules_criterion},
      {"conflict resolution", resolver_criterion},
      {"termination", termination_criterion},
      {"framesets", frameset_criterion},
      {"sessions", sessions_criterion},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = check.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << " (" << check.checks << " checks, " << ms << " ms)\n";
    for (std::size_t k = 0; k < check.failures.size() && k < 5; ++k) std::cout << "      " << check.failures[k] << "\n";
    if (check.failures.size() > 5) std::cout << "      ... " << check.failures.size() - 5 << " more\n";
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed;
}
