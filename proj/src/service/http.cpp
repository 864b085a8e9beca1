// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include "fkb/error.hpp"
#include "fkb/service.hpp"

namespace fkb::service {

HttpServer::HttpServer(ConsultService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& in, httplib::Response& out) {
    Request req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [k, v] : in.params) req.query[k] = v;
    req.body = in.body;
    auto r = service_.handle(req);
    out.status = r.status;
    for (const auto& [k, v] : r.headers) out.set_header(k, v);
    if (!r.content_type.empty()) out.set_content(r.body, r.content_type);
  };
  // no SO_REUSEPORT: a second server on the same port must fail
  server_->set_socket_options([](int sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  server_->Get(R"(/.*)", forward);
  server_->Post(R"(/.*)", forward);
  server_->Delete(R"(/.*)", forward);
  server_->Options(R"(/.*)", forward);
  server_->Put(R"(/.*)", forward);
  server_->Patch(R"(/.*)", forward);
}

HttpServer::~HttpServer() { stop(); }

std::uint16_t HttpServer::listen(const std::string& host, std::uint16_t port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(Errc::BindError, "cannot listen on " + host + ":" + std::to_string(port),
                {host + ":" + std::to_string(port)});
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return static_cast<std::uint16_t>(bound);
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace fkb::service
