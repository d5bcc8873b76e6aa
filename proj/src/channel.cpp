#include "smtpguard/channel.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <stdexcept>
#include <system_error>

namespace smtpguard {

LineChannel::ReadResult LineChannel::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = clock().now() + timeout;
  std::size_t scanned = 0;
  for (;;) {
    auto nl = buffer_.find('\n', scanned);
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') {
        line.pop_back();
      }
      return {Status::Ok, std::move(line)};
    }
    scanned = buffer_.size();
    if (buffer_.size() > max_line_bytes_) {
      buffer_.clear();
      return {Status::TooLong, {}};
    }

    const auto before = buffer_.size();
    switch (receive(buffer_, deadline)) {
    case RecvStatus::Data:
      if (capture_) {
        captured_.append(buffer_, before, std::string::npos);
      }
      break;
    case RecvStatus::Timeout:
      return {Status::Timeout, {}};
    case RecvStatus::Closed:
      return {Status::Closed, {}};
    }
  }
}

bool LineChannel::write(std::string_view bytes) { return send(bytes); }

bool LineChannel::write_line(std::string_view line) {
  std::string wire(line);
  wire += "\r\n";
  return send(wire);
}

bool LineChannel::write_reply(const Reply& reply) {
  return send(render_reply(reply));
}

ReplyRead read_reply(LineChannel& channel, std::chrono::milliseconds timeout) {
  ReplyRead out;
  for (;;) {
    auto r = channel.read_line(timeout);
    if (r.status != LineChannel::Status::Ok) {
      out.status = r.status;
      return out;
    }
    out.lines.push_back(r.line);
    auto head = peek_reply_line(r.line);
    if (!head || head->last) {
      break;
    }
  }
  try {
    out.reply = parse_reply(std::span<const std::string>(out.lines));
  } catch (const ProtocolError&) {
  } catch (const InvalidArgument&) {
  }
  return out;
}

// ---------------------------------------------------------------------------
// TCP

TcpChannel::TcpChannel(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpChannel::~TcpChannel() { close(); }

void TcpChannel::close() {
  std::lock_guard guard(fd_mutex_);
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpChannel::shutdown() {
  std::lock_guard guard(fd_mutex_);
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
  }
}

std::string TcpChannel::peer() const {
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  if (::getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    return "unknown";
  }
  char host[NI_MAXHOST];
  char serv[NI_MAXSERV];
  if (::getnameinfo(reinterpret_cast<sockaddr*>(&addr), len, host, sizeof host,
                    serv, sizeof serv, NI_NUMERICHOST | NI_NUMERICSERV) != 0) {
    return "unknown";
  }
  return std::string(host) + ":" + serv;
}

LineChannel::RecvStatus TcpChannel::receive(std::string& out,
                                            Clock::Duration deadline) {
  if (fd_ < 0) {
    return RecvStatus::Closed;
  }
  for (;;) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - clock().now());
    if (remaining.count() < 0) {
      return RecvStatus::Timeout;
    }
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) {
        continue;
      }
      return RecvStatus::Closed;
    }
    if (rc == 0) {
      if (clock().now() >= deadline) {
        return RecvStatus::Timeout;
      }
      continue;
    }
    char buf[4096];
    ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n > 0) {
      out.append(buf, static_cast<std::size_t>(n));
      return RecvStatus::Data;
    }
    if (n < 0 && errno == EINTR) {
      continue;
    }
    return RecvStatus::Closed;
  }
}

bool TcpChannel::send(std::string_view bytes) {
  while (!bytes.empty()) {
    if (fd_ < 0) {
      return false;
    }
    ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host,
                                                std::uint16_t port,
                                                std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const auto service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw std::runtime_error("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> list(found, ::freeaddrinfo);

  std::error_code last_error = std::make_error_code(std::errc::host_unreachable);
  for (auto* ai = list.get(); ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_error = std::error_code(errno, std::system_category());
      continue;
    }
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc == 1) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else {
        errno = rc == 0 ? ETIMEDOUT : errno;
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      return std::make_unique<TcpChannel>(fd);
    }
    last_error = std::error_code(errno, std::system_category());
    ::close(fd);
  }
  throw std::system_error(last_error, "cannot connect to " + host + ":" + service);
}

} // namespace smtpguard
