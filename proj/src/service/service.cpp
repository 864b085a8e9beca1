// SPDX-License-Identifier: Apache-2.0
#include "fkb/service.hpp"

#include <chrono>

#include "fkb/distribution.hpp"
#include "fkb/error.hpp"

namespace fkb::service {

// ---- JSON shapes -------------------------------------------------------------------

json value_to_json(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Integer: return v.as_integer();
    case ValueKind::Boolean: return v.as_boolean();
    case ValueKind::String: return v.as_string();
    case ValueKind::Reference: return v.as_reference();
    case ValueKind::List: {
      json arr = json::array();
      for (const auto& item : v.items()) arr.push_back(value_to_json(item));
      return arr;
    }
    case ValueKind::Unknown: break;
  }
  return nullptr;
}

Value value_from_json(const json& j, const SlotType& type) {
  if (j.is_string()) return parse_answer(j.get<std::string>(), type);
  if (type.kind == ValueKind::List) {
    if (!j.is_array()) return Value::unknown();
    std::vector<Value> items;
    for (const auto& e : j) {
      auto v = value_from_json(e, SlotType{type.element});
      if (v.is_unknown()) return Value::unknown();
      items.push_back(std::move(v));
    }
    return Value::list(type.element, std::move(items));
  }
  const auto kind = type.kind;
  if (j.is_number_integer() && (kind == ValueKind::Integer || kind == ValueKind::Unknown)) {
    return Value::integer(j.get<std::int64_t>());
  }
  if (j.is_boolean() && (kind == ValueKind::Boolean || kind == ValueKind::Unknown)) return Value::boolean(j.get<bool>());
  return Value::unknown();
}

json question_to_json(const Question& q) {
  json choices = json::array();
  for (const auto& c : q.choices) choices.push_back(value_to_json(c));
  json out = {{"id", q.id},         {"frame", q.frame},    {"slot", q.slot},
              {"prompt", q.prompt}, {"kind", q.type.name()}, {"choices", choices}};
  if (!q.violations.empty()) out["violations"] = q.violations;
  return out;
}

json trace_to_json(const std::vector<TraceEvent>& trace) {
  json events = json::array();
  for (const auto& e : trace) {
    json ev = {{"seq", e.seq}, {"kind", std::string(to_string(e.kind))}, {"frame", e.frame}, {"slot", e.slot}};
    if (!e.source.empty()) ev["source"] = e.source;
    if (e.value.is_known()) ev["value"] = value_to_json(e.value);
    if (!e.note.empty()) ev["note"] = e.note;
    events.push_back(std::move(ev));
  }
  return events;
}

namespace {

json result_json(const Value& v) { return {{"kind", std::string(to_string(v.kind()))}, {"value", value_to_json(v)}}; }

std::string code_name(Errc code) { return std::string(to_string(code)); }

Response json_response(int status, const json& body) {
  Response r;
  r.status = status;
  r.body = body.dump();
  return r;
}

Response error_response(int status, const std::string& code, const std::string& message, json extra = {}) {
  json err = {{"code", code}, {"message", message}};
  if (extra.is_object()) {
    for (auto& [k, v] : extra.items()) err[k] = v;
  }
  return json_response(status, {{"error", err}});
}

Response error_response(int status, const Error& e, json extra = {}) {
  if (!e.details().empty() && !extra.contains("details")) {
    if (!extra.is_object()) extra = json::object();
    extra["details"] = e.details();
  }
  return error_response(status, code_name(e.code()), e.what(), std::move(extra));
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) out.push_back(path.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

/// "Frame.slot" with both parts identifiers.
std::optional<std::pair<std::string, std::string>> parse_goal(const std::string& goal) {
  auto dot = goal.find('.');
  if (dot == std::string::npos) return std::nullopt;
  auto frame = goal.substr(0, dot);
  auto slot = goal.substr(dot + 1);
  if (!is_identifier(frame) || !is_identifier(slot)) return std::nullopt;
  return std::pair{frame, slot};
}

}  // namespace

// ---- records -------------------------------------------------------------------------

struct ConsultService::Record {
  std::mutex busy;
  std::string id;
  std::unique_ptr<Session> session;
  std::string frame;
  std::string slot;
  std::string state = "running";
  std::optional<Value> result;
  std::optional<json> error;
  std::chrono::steady_clock::time_point touched;
  std::int64_t created_at = 0;
  std::int64_t updated_at = 0;
  bool counted_done = false;
  // question id -> (accepted value, response sent)
  std::map<std::string, std::pair<Value, json>> applied;
};

namespace {

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

}  // namespace

ConsultService::ConsultService(std::shared_ptr<SessionFactory> factory, ServiceOptions options)
    : factory_(std::move(factory)), options_(std::move(options)) {}

ConsultService::~ConsultService() = default;

std::chrono::steady_clock::time_point ConsultService::now() const {
  return options_.clock ? options_.clock() : std::chrono::steady_clock::now();
}

void ConsultService::purge() {
  std::lock_guard lock(mu_);
  const auto t = now();
  std::erase_if(records_, [&](auto& kv) {
    auto& r = *kv.second;
    if (t - r.touched < options_.ttl) return false;
    std::unique_lock busy(r.busy, std::try_to_lock);
    return busy.owns_lock();
  });
}

std::shared_ptr<ConsultService::Record> ConsultService::find(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : it->second;
}

std::size_t ConsultService::active_sessions() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::shared_ptr<ConsultService::Record> ConsultService::admit(std::unique_ptr<Session> session, std::string frame,
                                                              std::string slot) {
  auto r = std::make_shared<Record>();
  r->session = std::move(session);
  r->frame = std::move(frame);
  r->slot = std::move(slot);
  r->touched = now();
  r->created_at = r->updated_at = unix_now();
  std::lock_guard lock(mu_);
  do {
    r->id = net::random_token();
  } while (records_.count(r->id));
  records_[r->id] = r;
  return r;
}

void ConsultService::settle(Record& r, const Counters& before, const StepResult* step) {
  const auto& after = r.session->counters();
  if (step) {
    switch (step->outcome) {
      case Outcome::Suspended: r.state = "awaiting_answer"; break;
      case Outcome::Resolved: r.state = "done"; r.result = step->value; break;
      case Outcome::Unknown: r.state = "done"; r.result = Value::unknown(); break;
    }
  }
  r.touched = now();
  r.updated_at = unix_now();
  std::lock_guard lock(metrics_mu_);
  metrics_.questions_asked += after.questions_asked - before.questions_asked;
  metrics_.rules_fired += after.rules_fired - before.rules_fired;
  metrics_.remote_calls += after.remote_calls - before.remote_calls;
  for (const auto& [frame, n] : after.rules_fired_by_frame) {
    auto it = before.rules_fired_by_frame.find(frame);
    metrics_.rules_fired_by_frame[frame] += n - (it == before.rules_fired_by_frame.end() ? 0 : it->second);
  }
  if ((r.state == "done" || r.state == "failed") && !r.counted_done) {
    r.counted_done = true;
    if (r.state == "done") ++metrics_.sessions_completed;
  }
}

json ConsultService::step_json(const Record& r) const {
  json out = {{"session", r.id},
              {"state", r.state},
              {"goal", r.frame + "." + r.slot},
              {"created_at", r.created_at},
              {"updated_at", r.updated_at}};
  if (r.state == "awaiting_answer" && r.session->pending()) out["question"] = question_to_json(*r.session->pending());
  if (r.state == "done") out["result"] = result_json(r.result.value_or(Value::unknown()));
  if (r.error) out["error"] = *r.error;
  return out;
}

json ConsultService::metrics() const {
  std::lock_guard lock(metrics_mu_);
  return {{"metrics",
           {{"sessions_started", metrics_.sessions_started},
            {"sessions_completed", metrics_.sessions_completed},
            {"questions_asked", metrics_.questions_asked},
            {"rules_fired", metrics_.rules_fired},
            {"remote_calls", metrics_.remote_calls},
            {"rules_fired_by_frame", metrics_.rules_fired_by_frame}}}};
}

Response ConsultService::finish(Response r) const {
  r.headers.emplace_back("Access-Control-Allow-Origin", options_.cors_origin);
  r.headers.emplace_back("Vary", "Origin");
  return r;
}

// ---- operations ----------------------------------------------------------------------------

Response ConsultService::start(const Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception& e) {
    return error_response(400, "bad_request", std::string("malformed JSON: ") + e.what());
  }
  if (!body.is_object() || !body.contains("goal") || !body["goal"].is_string()) {
    return error_response(400, code_name(Errc::BadGoal), "body must be {\"goal\": \"Frame.slot\"}");
  }
  const auto goal_text = body["goal"].get<std::string>();
  auto goal = parse_goal(goal_text);
  if (!goal) return error_response(400, code_name(Errc::BadGoal), "goal '" + goal_text + "' is not Frame.slot");

  auto session = factory_->create();
  const Counters before = session->counters();
  StepResult step;
  std::optional<json> failure;
  try {
    step = session->infer(goal->first, goal->second);
  } catch (const Error& e) {
    if (e.code() == Errc::UnknownFrame || e.code() == Errc::UnknownSlot) return error_response(404, e);
    failure = json{{"code", code_name(e.code())}, {"message", e.what()}};
  }
  auto r = admit(std::move(session), goal->first, goal->second);
  std::lock_guard busy(r->busy);
  {
    std::lock_guard lock(metrics_mu_);
    ++metrics_.sessions_started;
  }
  if (failure) {
    r->state = "failed";
    r->error = failure;
    settle(*r, before, nullptr);
  } else {
    settle(*r, before, &step);
  }
  return json_response(201, step_json(*r));
}

Response ConsultService::restore(const Request& req) {
  std::unique_ptr<Session> session;
  try {
    session = Session::restore(*factory_, req.body);
  } catch (const Error& e) {
    if (e.code() == Errc::WorldVersionMismatch || e.code() == Errc::VersionUnsupported) return error_response(410, e);
    return error_response(400, e);
  }
  std::string frame;
  std::string slot;
  if (session->goal()) std::tie(frame, slot) = *session->goal();
  const Counters before = session->counters();
  StepResult step;
  if (session->pending()) {
    step = {Outcome::Suspended, {}, session->pending()};
  } else if (const auto* v = session->goal() ? session->memory().find(frame, slot) : nullptr) {
    step = {Outcome::Resolved, *v, std::nullopt};
  }
  auto r = admit(std::move(session), frame, slot);
  std::lock_guard busy(r->busy);
  {
    std::lock_guard lock(metrics_mu_);
    ++metrics_.sessions_started;
  }
  r->counted_done = true;  // finished before the snapshot was taken; not a new completion
  if (step.outcome == Outcome::Suspended) r->counted_done = false;
  settle(*r, before, &step);
  return json_response(201, step_json(*r));
}

Response ConsultService::answer(Record& r, const Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception& e) {
    return error_response(400, "bad_request", std::string("malformed JSON: ") + e.what());
  }
  if (!body.is_object() || !body.contains("question_id") || !body["question_id"].is_string() ||
      !body.contains("value")) {
    return error_response(400, "bad_request", "body must be {\"question_id\": ..., \"value\": ...}");
  }
  const auto qid = body["question_id"].get<std::string>();

  const auto& pending = r.session->pending();
  if (auto it = r.applied.find(qid); it != r.applied.end() && !(pending && pending->id == qid)) {
    // retry of an applied answer: same reply, nothing re-run
    if (value_from_json(body["value"], it->second.first.type()) == it->second.first) {
      return json_response(200, it->second.second);
    }
    return error_response(409, "question_answered", "question '" + qid + "' was already answered");
  }
  if (r.state != "awaiting_answer" || !pending) {
    return error_response(409, "not_awaiting_answer", "session is " + r.state);
  }
  if (pending->id != qid) {
    return error_response(409, "wrong_question", "the pending question is '" + pending->id + "'",
                          {{"pending", pending->id}});
  }
  const Question q = *pending;
  const Value v = value_from_json(body["value"], q.type);
  if (v.is_unknown()) {
    return error_response(422, code_name(Errc::AnswerTypeMismatch),
                          "expected " + q.type.name() + ", got " + body["value"].dump(),
                          {{"expected", q.type.name()}, {"question", question_to_json(q)}});
  }
  const Counters before = r.session->counters();
  StepResult step;
  try {
    step = r.session->answer(qid, v);
  } catch (const Error& e) {
    if (e.code() == Errc::AnswerTypeMismatch) {
      return error_response(422, e, {{"expected", q.type.name()}, {"question", question_to_json(q)}});
    }
    if (e.code() == Errc::ConstraintViolation) {
      settle(r, before, nullptr);
      return error_response(422, e,
                            {{"violations", e.details()}, {"question", question_to_json(*r.session->pending())}});
    }
    if (e.code() == Errc::NoPendingQuestion) return error_response(409, e);
    r.state = "failed";
    r.error = json{{"code", code_name(e.code())}, {"message", e.what()}};
    settle(r, before, nullptr);
    return json_response(200, step_json(r));
  }
  settle(r, before, &step);
  auto reply = step_json(r);
  r.applied[qid] = {v, reply};
  return json_response(200, reply);
}

Response ConsultService::handle(const Request& req) {
  purge();
  if (req.method == "OPTIONS") {
    Response r;
    r.status = 204;
    r.content_type.clear();
    r.headers.emplace_back("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    r.headers.emplace_back("Access-Control-Allow-Headers", "Content-Type");
    r.headers.emplace_back("Access-Control-Max-Age", "600");
    return finish(std::move(r));
  }
  const auto parts = split_path(req.path);
  auto method_not_allowed = [&] {
    return finish(error_response(405, "method_not_allowed", req.method + " is not supported on " + req.path));
  };
  if (parts.size() < 2 || parts[0] != "api") {
    return finish(error_response(404, "not_found", "no route for " + req.path));
  }
  if (parts.size() == 2 && parts[1] == "metrics") {
    if (req.method != "GET") return method_not_allowed();
    return finish(json_response(200, metrics()));
  }
  if (parts.size() == 2 && parts[1] == "kb") {
    if (req.method != "GET") return method_not_allowed();
    json frames = json::array();
    for (const auto& f : factory_->world()->frames()) {
      json slots = json::array();
      for (const auto& s : f.slots) {
        json sj = {{"name", s.name}, {"kind", s.type.name()}};
        if (s.default_value) sj["default"] = value_to_json(*s.default_value);
        slots.push_back(std::move(sj));
      }
      json fj = {{"name", f.name}, {"kind", std::string(to_string(f.kind))}, {"slots", slots}};
      fj["parent"] = f.parent ? json(*f.parent) : json(nullptr);
      if (!f.url.empty()) fj["url"] = f.url;
      frames.push_back(std::move(fj));
    }
    return finish(json_response(200, {{"frames", frames}}));
  }
  if (parts[1] != "sessions") return finish(error_response(404, "not_found", "no route for " + req.path));

  if (parts.size() == 2) {
    if (req.method != "POST") return method_not_allowed();
    return finish(req.query.count("restore") ? restore(req) : start(req));
  }
  const auto record = find(parts[2]);
  if (!record) return finish(error_response(404, "unknown_session", "no session '" + parts[2] + "' (it may have expired)"));
  std::unique_lock busy(record->busy, std::try_to_lock);
  if (!busy.owns_lock()) {
    return finish(error_response(409, "busy", "session is handling another request"));
  }
  record->touched = now();
  if (parts.size() == 3) {
    if (req.method == "GET") return finish(json_response(200, step_json(*record)));
    if (req.method == "DELETE") {
      std::lock_guard lock(mu_);
      records_.erase(record->id);
      Response r;
      r.status = 204;
      r.content_type.clear();
      return finish(std::move(r));
    }
    return method_not_allowed();
  }
  if (parts.size() == 4 && parts[3] == "answers") {
    if (req.method != "POST") return method_not_allowed();
    return finish(answer(*record, req));
  }
  if (parts.size() == 4 && parts[3] == "trace") {
    if (req.method != "GET") return method_not_allowed();
    return finish(json_response(200, {{"session", record->id}, {"events", trace_to_json(record->session->trace())}}));
  }
  if (parts.size() == 4 && parts[3] == "snapshot") {
    if (req.method != "GET") return method_not_allowed();
    Response r;
    r.body = record->session->snapshot();
    r.content_type = "application/xml";
    return finish(std::move(r));
  }
  return finish(error_response(404, "not_found", "no route for " + req.path));
}

}  // namespace fkb::service
