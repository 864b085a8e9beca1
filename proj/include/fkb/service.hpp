// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fkb/session.hpp"

namespace httplib {
class Server;
}

namespace fkb::service {

using json = nlohmann::json;

/// Integers, booleans and strings map to JSON scalars, references to their
/// frame name, lists to arrays and Unknown to null.
json value_to_json(const Value& v);
/// Answer value for a question of `type`; Unknown when it does not fit.
/// Strings are read as answer text, so "12" answers an integer question.
Value value_from_json(const json& j, const SlotType& type);

json question_to_json(const Question& q);
json trace_to_json(const std::vector<TraceEvent>& trace);

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::vector<std::pair<std::string, std::string>> headers;
};

struct ServiceOptions {
  /// Idle sessions older than this answer 404.
  std::chrono::seconds ttl{3600};
  /// Allowed console origin for CORS.
  std::string cors_origin = "*";
  /// Time source for expiry; steady_clock when empty.
  std::function<std::chrono::steady_clock::time_point()> clock;
};

/// Consultation API over one world. Transport-free: requests come in as
/// method + path + body; HttpServer puts it on the network.
///
/// A session serves one request at a time; a request for a session that is
/// already busy gets 409 with code "busy" instead of queueing.
class ConsultService {
public:
  explicit ConsultService(std::shared_ptr<SessionFactory> factory, ServiceOptions options = {});
  ~ConsultService();

  Response handle(const Request& request);

  /// Counter document served at /api/metrics.
  json metrics() const;
  std::size_t active_sessions() const;
  const ServiceOptions& options() const { return options_; }
  SessionFactory& factory() { return *factory_; }

private:
  struct Record;
  struct Metrics {
    std::uint64_t sessions_started = 0;
    std::uint64_t sessions_completed = 0;
    std::uint64_t questions_asked = 0;
    std::uint64_t rules_fired = 0;
    std::uint64_t remote_calls = 0;
    std::map<std::string, std::uint64_t> rules_fired_by_frame;
  };

  Response start(const Request& request);
  Response restore(const Request& request);
  Response answer(Record& record, const Request& request);
  std::shared_ptr<Record> find(const std::string& id);
  std::shared_ptr<Record> admit(std::unique_ptr<Session> session, std::string frame, std::string slot);
  void settle(Record& record, const Counters& before, const StepResult* step);
  json step_json(const Record& record) const;
  void purge();
  std::chrono::steady_clock::time_point now() const;
  Response finish(Response r) const;

  std::shared_ptr<SessionFactory> factory_;
  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Record>> records_;
  mutable std::mutex metrics_mu_;
  Metrics metrics_;
};

/// HTTP/1.1 front end for a ConsultService.
class HttpServer {
public:
  explicit HttpServer(ConsultService& service);
  ~HttpServer();

  /// Binds and starts serving in the background; port 0 picks a free port.
  /// Throws BindError.
  std::uint16_t listen(const std::string& host, std::uint16_t port);
  void stop();

private:
  ConsultService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace fkb::service
