// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fkb/datasources.hpp"
#include "fkb/world.hpp"

namespace fkb {

namespace xml {
struct Element;
}

enum class TraceKind {
  GoalPushed,
  RuleTried,
  RuleFired,
  RuleSkipped,
  ValueAssigned,
  QuestionEmitted,
  AnswerReceived,
  RemoteCall,
  CacheHit,
  Warning,
};

std::string_view to_string(TraceKind kind);
std::optional<TraceKind> trace_kind_from_string(std::string_view name);

/// One step of a consultation. `frame`/`slot` name the goal (origin frame);
/// `source` names the action as `Level#index` or a remote url; `note`
/// carries the skip reason, question id or warning text.
struct TraceEvent {
  std::uint64_t seq = 0;
  TraceKind kind = TraceKind::GoalPushed;
  std::string frame;
  std::string slot;
  std::string source;
  Value value;
  std::string note;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

std::string to_string(const TraceEvent& e);

struct Question {
  std::string id;
  std::string frame;  // origin frame the answer is stored under
  std::string slot;
  std::string prompt;
  SlotType type;
  std::vector<Value> choices;          // from `slot in [...]` constraints
  std::vector<std::string> violations;  // set when a previous answer was rejected

  friend bool operator==(const Question&, const Question&) = default;
};

enum class Outcome { Resolved, Unknown, Suspended };
std::string_view to_string(Outcome outcome);

struct StepResult {
  Outcome outcome = Outcome::Unknown;
  Value value;
  std::optional<Question> question;
};

/// Thrown through the engine when an ask-user action needs an answer.
/// Callers of the public operations never see it.
struct Suspension {
  Question question;
};

struct Counters {
  std::uint64_t rules_fired = 0;
  std::uint64_t questions_asked = 0;
  std::uint64_t remote_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t rules_fetched = 0;
  std::uint64_t rows_read = 0;
  std::map<std::string, std::uint64_t> rules_fired_by_frame;

  friend bool operator==(const Counters&, const Counters&) = default;
};

class Session;

/// Typed answer read from user text: integers, true/false, strings (quotes
/// optional), frame names and bracketed comma-separated lists. Unknown when
/// the text does not fit `type`; untyped questions take the cell typing of
/// tables.
Value parse_answer(std::string_view text, const SlotType& type);

/// Orders the on-need candidates of one ancestry level. Implementations may
/// drop candidates but never invent or duplicate them.
class ConflictResolver {
public:
  virtual ~ConflictResolver() = default;
  virtual std::vector<Action> order(std::vector<Action> candidates, const Session& session) const = 0;
  /// On-change policy for frames using this resolver: fire every applicable
  /// forward rule, or only the first.
  virtual bool fire_all_on_change() const { return true; }
};

/// Total expression node count over condition and assigned values.
std::size_t rule_complexity(const Rule& rule);

class ResolverRegistry {
public:
  /// Registry holding "first", "complex" and "fire-first".
  static ResolverRegistry with_builtins();

  void add(const std::string& id, std::shared_ptr<const ConflictResolver> resolver);
  const ConflictResolver& get(const std::string& id) const;  // throws UnknownResolver
  bool contains(const std::string& id) const { return resolvers_.count(id) > 0; }

private:
  std::map<std::string, std::shared_ptr<const ConflictResolver>> resolvers_;
};

/// Applies `resolver` (looked up by id) to `candidates`.
std::vector<Action> select_actions(const ResolverRegistry& registry, const std::string& resolver_id,
                                   std::vector<Action> candidates, const Session& session);

using ExternFunction = std::function<Value(const std::vector<Value>&)>;

/// Serves the slots of an external-object frame.
struct ExternalAdapter {
  std::function<std::optional<Value>(const std::string& slot)> read;
};

/// Stand-in for an origin frame that lives on the calling instance while a
/// session serves a remote query. Unqualified slot reads go back to the
/// caller.
class OriginProxy {
public:
  virtual ~OriginProxy() = default;
  virtual const std::string& frame() const = 0;
  /// Value inferred at the caller; may throw Suspension.
  virtual Value read(const std::string& slot) = 0;
  /// Value already stored at the caller, without inference.
  virtual Value peek(const std::string& slot) = 0;
};

enum class SpecializeProbe { Match, NoMatch, Open };
std::string_view to_string(SpecializeProbe probe);

/// Link from a session to the instances hosting its stub frames and rule
/// repositories. Implemented by the distribution module.
class RemoteBackend {
public:
  virtual ~RemoteBackend() = default;
  /// Slot of the remote frame `stub`. When `origin` is empty the remote
  /// frame is its own origin; otherwise `origin` names a local frame whose
  /// slots the remote side reads back through callbacks.
  virtual StepResult get_slot(const FrameDef& stub, const std::string& slot, const std::string& origin) = 0;
  /// Constraint test of remote frame `candidate` against the origin's values.
  virtual SpecializeProbe specialize_probe(const FrameDef& candidate, const std::string& origin) = 0;
  /// Constraints above the stub level violated by `candidate` for origin.
  virtual std::vector<std::string> check_probe(const FrameDef& stub, const std::string& origin,
                                               const std::string& slot, const Value& candidate) = 0;
  /// Rules served for `frame` at `url`. Throws ConnectError when unreachable.
  virtual xml::Element get_rules(const std::string& url, const std::string& frame) = 0;
  /// Stores an answer for a question asked by the remote frame itself.
  /// Throws ConstraintViolation when the remote side rejects it.
  virtual void answer(const FrameDef& stub, const std::string& frame, const std::string& slot, const Value& value) = 0;
};

using RemoteConnector = std::function<std::unique_ptr<RemoteBackend>(Session&)>;

struct SessionOptions {
  int cascade_limit = 100;
  std::string default_resolver = "first";
  /// Test mode: every stub cache hit is also fetched over the wire and
  /// compared; a mismatch raises ProtocolViolation.
  bool verify_cache = false;
};

/// Shared, read-mostly configuration behind the sessions of one world.
/// Register everything before creating sessions.
class SessionFactory {
public:
  /// Binds the tables of every frameset in the world (relative locations
  /// resolve against the world's base directory).
  explicit SessionFactory(std::shared_ptr<const FrameWorld> world, SessionOptions options = {});

  const std::shared_ptr<const FrameWorld>& world() const { return env_->world; }
  const SessionOptions& options() const { return env_->options; }

  /// Throws UnknownExtern when undeclared, ExternArityMismatch on arity skew.
  void register_extern(const std::string& name, int arity, ExternFunction fn);
  /// Throws UnknownFrame unless `frame` is an external-object frame.
  void register_adapter(const std::string& frame, ExternalAdapter adapter);
  void register_resolver(const std::string& id, std::shared_ptr<const ConflictResolver> resolver);
  /// Default resolver id for frames of this factory's sessions.
  void assign_resolver(const std::string& frame, const std::string& id);
  void set_remote(RemoteConnector connector);

  /// Bound table of a frameset, or null.
  std::shared_ptr<const TableSource> table(const std::string& frameset) const;

  std::unique_ptr<Session> create() const;

  struct Environment {
    std::shared_ptr<const FrameWorld> world;
    SessionOptions options;
    ResolverRegistry resolvers = ResolverRegistry::with_builtins();
    std::map<std::string, std::string> frame_resolvers;
    std::map<std::string, std::pair<int, ExternFunction>> externs;
    std::map<std::string, ExternalAdapter> adapters;
    std::map<std::string, std::shared_ptr<const TableSource>> tables;
    RemoteConnector remote;
  };

private:
  std::shared_ptr<Environment> env_;
};

/// One consultation: working memory, trace, pending question and caches over
/// a shared frozen world. Single-threaded; may move between threads between
/// calls.
class Session : public FrameSource {
public:
  explicit Session(std::shared_ptr<const SessionFactory::Environment> env);
  ~Session() override;

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // ---- consultation --------------------------------------------------------

  /// Backward-chains `slot` for `frame` until resolved, unknown or
  /// suspended on a question. Throws UnknownFrame / UnknownSlot.
  StepResult infer(const std::string& frame, const std::string& slot);
  /// Answers the pending question and resumes the goal. Throws
  /// NoPendingQuestion, AnswerTypeMismatch or ConstraintViolation; after
  /// the latter the pending question carries the violations.
  StepResult answer(const std::string& question_id, const Value& value);
  /// Direct assignment with constraint checking and on-change rules.
  /// Throws TypeMismatch, ConstraintViolation, ReadOnlySlot,
  /// CascadeLimitExceeded.
  void assign(const std::string& frame, const std::string& slot, const Value& value);

  /// Deepest constrained descendant of `root` matched by origin's values.
  Value specify_frame(const std::string& origin, const std::string& root);
  /// First descendant of `root` (pre-order) satisfying `condition` with
  /// `var` bound to it.
  Value eval_exists(const std::string& origin, const std::string& root, const std::string& var,
                    const ExprPtr& condition);
  /// Evaluates an expression with `origin` as the frame of unqualified refs.
  Value eval_expr(const Expr& e, const std::string& origin);

  /// Frame built from the first row with `column = value`, added to this
  /// session's overlay under `frame_name`. Throws NoMatchingRow,
  /// AmbiguousFrameName, UnknownTable, UnknownColumn.
  std::string generate_frame(const std::string& frameset, const std::string& column, const Value& value,
                             const std::string& frame_name);
  /// Adds an action to a frame generated in this session.
  void attach_action(const std::string& frame, Action action);
  Value query_value(const std::string& frameset, const std::string& column, const std::string& key_column,
                    ExprOp op, const Value& key);

  void set_resolver(const std::string& frame, const std::string& id);  // throws UnknownResolver
  std::string resolver_for(const std::string& frame) const;

  // ---- observation ---------------------------------------------------------

  const WorkingMemory& memory() const { return memory_; }
  const std::vector<TraceEvent>& trace() const { return trace_; }
  const std::optional<Question>& pending() const { return pending_; }
  const std::optional<std::pair<std::string, std::string>>& goal() const { return goal_; }
  const Counters& counters() const { return counters_; }
  const FrameWorld& world() const { return *env_->world; }
  const SessionFactory::Environment& environment() const { return *env_; }
  /// Values obtained from remote frames: (stub frame, slot, origin) -> value.
  using CacheKey = std::tuple<std::string, std::string, std::string>;
  const std::map<CacheKey, Value>& stub_cache() const { return stub_cache_; }
  /// Frames added or modified for this session (merged remote rules,
  /// generated frames), by name.
  const std::map<std::string, FrameDef>& overlay() const { return overlay_; }
  const std::set<std::string>& fetched_rules() const { return fetched_; }
  /// Backend for stub frames, created on first use; null without a connector.
  RemoteBackend* remote_backend() { return remote(); }

  // ---- FrameSource -----------------------------------------------------------

  const FrameDef* find(std::string_view name) const override;
  std::vector<std::string> children(std::string_view name) const override;

  // ---- serving remote instances ---------------------------------------------

  /// Walks from `level` upward for a remote origin; nothing is stored.
  StepResult serve_slot(const std::string& level, const std::string& slot, OriginProxy& origin);
  SpecializeProbe serve_specialize_probe(const std::string& candidate, OriginProxy& origin);
  std::vector<std::string> serve_check_probe(const std::string& level, const std::string& slot,
                                             const Value& candidate, OriginProxy& origin);
  /// Slot of a local frame as its own origin, for a remote caller.
  StepResult serve_self(const std::string& frame, const std::string& slot);
  /// Stores a caller's answer for one of this instance's own frames.
  void serve_answer(const std::string& frame, const std::string& slot, const Value& value);

  /// Callback entry points for a remote instance serving one of our queries.
  Value callback_read(const std::string& origin, const std::string& slot);
  Value callback_peek(const std::string& origin, const std::string& slot) const;

  // ---- persistence -----------------------------------------------------------

  /// Interchange snapshot document (`<snapshot>`).
  std::string snapshot() const;
  /// Throws WorldVersionMismatch when the snapshot was taken against a
  /// different world, SchemaError on malformed documents.
  static std::unique_ptr<Session> restore(const SessionFactory& factory, std::string_view document);

  /// `<trace>` element with every event.
  xml::Element trace_to_xml() const;

private:
  friend class SessionContext;
  friend struct SnapshotCodec;

  struct Goal {
    std::string origin;
    std::string slot;
  };
  class GoalGuard;

  StepResult run_goal();
  Value need(const std::string& origin, const std::string& slot);
  Value read_origin(const std::string& origin, const std::string& slot);
  Value walk(const std::string& origin, const std::string& slot, std::optional<std::string> start_level,
             bool store_result);
  Value member_slot(const FrameDef& member, const std::string& slot);
  Value external_slot(const FrameDef& frame, const std::string& slot);
  Value remote_slot(const FrameDef& stub, const std::string& slot, const std::string& origin);
  std::vector<std::string> chain_for(const std::string& origin);
  void ensure_rules(const FrameDef& level);
  static bool gate(const Value& condition);
  std::optional<std::string> admissible(const std::string& origin, const std::string& slot, Value& v,
                                        const SlotDef* decl, const std::vector<std::string>& chain);
  bool try_rule(const Action& action, const std::string& level, std::size_t index, const std::string& origin,
                const std::string& slot, const SlotDef* decl, const std::vector<std::string>& chain,
                bool store_result, Value& out);
  bool try_query(const Action& action, const std::string& level, std::size_t index, const std::string& origin,
                 const std::string& slot, const SlotDef* decl, const std::vector<std::string>& chain,
                 bool store_result, Value& out);
  bool fire_forward(const Action& action, const std::string& level, std::size_t index, const std::string& origin);
  void store(const std::string& origin, const std::string& slot, const Value& value, bool fire,
             const std::string& source);
  void on_change(const std::string& origin, const std::string& slot);
  std::vector<std::string> violations(const std::string& origin, const std::string& slot, const Value& candidate,
                                      const std::vector<std::string>& chain);
  std::vector<Value> choices(const std::string& origin, const std::string& slot,
                             const std::vector<std::string>& chain);
  const SlotDef* declaration(const std::vector<std::string>& chain, const std::string& slot) const;
  SpecializeProbe test_candidate(const std::string& origin, const FrameDef& candidate);
  Value exists_with(const std::string& origin, const Expr& node, const std::map<std::string, std::string>& bindings);
  std::shared_ptr<const TableSource> table_of(const std::string& frameset) const;
  const std::vector<Value>& cached_row(const std::string& frameset, const TableSource& table, const std::string& key);
  Value call_extern(const Expr& call, const std::vector<Value>& args);
  RemoteBackend* remote();
  void emit(TraceKind kind, std::string frame, std::string slot, std::string source = {}, Value value = {},
            std::string note = {});
  bool on_stack(const std::string& origin, const std::string& slot) const;
  std::string level_resolver(const std::string& frame) const;

  std::shared_ptr<const SessionFactory::Environment> env_;
  WorkingMemory memory_;
  std::vector<TraceEvent> trace_;
  std::uint64_t next_seq_ = 1;
  std::optional<Question> pending_;
  std::optional<std::pair<std::string, std::string>> goal_;
  std::uint64_t next_question_ = 1;
  std::vector<Goal> stack_;
  int cascade_depth_ = 0;
  Counters counters_;
  std::map<std::string, std::string> resolvers_;
  std::map<std::string, FrameDef> overlay_;
  std::vector<std::string> overlay_order_;
  std::set<std::string> fetched_;
  std::map<CacheKey, Value> stub_cache_;
  std::map<std::pair<std::string, std::string>, std::vector<Value>> rows_;  // (frameset, key) -> cells
  mutable std::map<std::string, FrameDef, std::less<>> members_;
  OriginProxy* proxy_ = nullptr;
  std::unique_ptr<RemoteBackend> remote_;
  bool remote_made_ = false;
};

}  // namespace fkb
