// SPDX-License-Identifier: Apache-2.0
#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "fkb/distribution.hpp"
#include "fkb/error.hpp"

namespace fkb::net {

namespace {

constexpr std::chrono::milliseconds kServePoll{50};

std::string sys_error(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

Socket Socket::connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto where = host + ":" + std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0) {
    throw Error(Errc::ConnectError, "cannot resolve " + host + ": " + gai_strerror(rc), {where});
  }
  std::string last = "no address";
  for (auto* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s.valid()) {
      last = sys_error("socket");
      continue;
    }
    const int flags = ::fcntl(s.fd_, F_GETFL, 0);
    ::fcntl(s.fd_, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(s.fd_, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{s.fd_, POLLOUT, 0};
      rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
      if (rc == 0) {
        last = "connect timed out";
        continue;
      }
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(s.fd_, SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) {
        errno = err;
        last = sys_error("connect");
        continue;
      }
      rc = 0;
    }
    if (rc != 0) {
      last = sys_error("connect");
      continue;
    }
    ::fcntl(s.fd_, F_SETFL, flags);
    int one = 1;
    ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    ::freeaddrinfo(res);
    return s;
  }
  ::freeaddrinfo(res);
  throw Error(Errc::ConnectError, "cannot connect to " + where + ": " + last, {where});
}

void Socket::send_all(std::string_view bytes) {
  while (!bytes.empty()) {
    auto n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::ConnectError, sys_error("send"));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::string Socket::receive(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  int rc;
  do {
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  } while (rc < 0 && errno == EINTR);
  if (rc == 0) throw Error(Errc::Timeout, "no reply within " + std::to_string(timeout.count()) + " ms");
  if (rc < 0) throw Error(Errc::ConnectError, sys_error("poll"));
  char buf[16384];
  ssize_t n;
  do {
    n = ::recv(fd_, buf, sizeof buf, 0);
  } while (n < 0 && errno == EINTR);
  if (n < 0) {
    if (errno == ECONNRESET) return {};
    throw Error(Errc::ConnectError, sys_error("recv"));
  }
  return std::string(buf, static_cast<std::size_t>(n));
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

// ---- channel -------------------------------------------------------------------

Channel::Channel(Socket socket, std::shared_ptr<StatsSink> stats, std::chrono::milliseconds timeout)
    : socket_(std::move(socket)), stats_(std::move(stats)), timeout_(timeout) {
  if (!stats_) stats_ = std::make_shared<StatsSink>();
}

std::optional<Message> Channel::read_message(std::chrono::milliseconds timeout) {
  for (;;) {
    std::optional<std::string> payload;
    try {
      payload = decoder_.next();
    } catch (const Error&) {
      // oversized frame: the stream cannot be resynchronised
      stats_->error();
      closed_ = true;
      socket_.shutdown();
      throw;
    }
    if (payload) {
      try {
        auto m = decode_message(*payload);
        stats_->in(m.kind);
        return m;
      } catch (const Error& e) {
        stats_->error();
        auto reply = error_reply(e);
        reply.id = next_id_++;
        socket_.send_all(encode_frame(encode_message(reply)));
        continue;
      }
    }
    if (closed_) return std::nullopt;
    auto bytes = socket_.receive(timeout);
    if (bytes.empty()) {
      closed_ = true;
      return std::nullopt;
    }
    decoder_.feed(bytes);
  }
}

void Channel::send(Message& m) {
  if (m.id == 0) m.id = next_id_++;
  // counted first so a peer that has read the reply also sees the count
  stats_->out(m.kind);
  socket_.send_all(encode_frame(encode_message(m)));
}

void Channel::dispatch(const Message& request) {
  if (request.kind == MsgKind::Bye) return;
  Message reply;
  if (!handler_) {
    reply = error_reply(Error(Errc::ProtocolViolation, "no handler for inbound requests"));
  } else {
    try {
      reply = handler_(request);
    } catch (const Error& e) {
      reply = error_reply(e);
    } catch (const std::exception& e) {
      reply = error_reply(Error(Errc::RemoteError, e.what()));
    }
  }
  reply.id = 0;
  reply.re = request.id;
  send(reply);
}

Message Channel::call(Message request) {
  request.id = 0;
  request.re = 0;
  send(request);
  const auto id = request.id;
  for (;;) {
    auto m = read_message(timeout_);
    if (!m) throw Error(Errc::ConnectError, "peer closed the connection");
    if (!m->is_reply()) {
      if (m->kind == MsgKind::Error) continue;  // unsolicited complaint about something we sent
      if (m->kind == MsgKind::Bye) throw Error(Errc::ConnectError, "peer closed the connection");
      dispatch(*m);
      continue;
    }
    if (m->re != id) {
      throw Error(Errc::ProtocolViolation,
                  "reply to " + std::to_string(m->re) + " while waiting for " + std::to_string(id),
                  {std::to_string(m->re), std::to_string(id)});
    }
    return std::move(*m);
  }
}

void Channel::notify(Message request) {
  request.id = 0;
  request.re = 0;
  send(request);
}

void Channel::serve(const std::atomic<bool>& stop) {
  while (!stop) {
    std::optional<Message> m;
    try {
      m = read_message(kServePoll);
    } catch (const Error& e) {
      if (e.code() == Errc::Timeout) continue;
      return;
    }
    if (!m || m->kind == MsgKind::Bye) return;
    if (m->is_reply()) {
      stats_->error();
      continue;
    }
    if (m->kind == MsgKind::Error) continue;
    try {
      dispatch(*m);
    } catch (const Error&) {
      return;
    }
  }
}

}  // namespace fkb::net
