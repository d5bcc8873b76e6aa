#include "smtpguard/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "smtpguard/error.hpp"

namespace smtpguard {

namespace {

void log_line(const Logger& log, std::string_view text) {
  if (log) {
    log(text);
  }
}

} // namespace

ConnectionOutcome run_connection(LineChannel& channel, const ConnectionContext& ctx) {
  ConnectionOutcome outcome;
  const auto timeout =
      std::chrono::duration_cast<std::chrono::milliseconds>(ctx.policy.command_timeout());

  if (!channel.write_reply(greet(ctx.policy))) {
    return outcome;
  }

  SessionState current = state::Connected{};
  for (;;) {
    auto in = channel.read_line(timeout);
    switch (in.status) {
    case LineChannel::Status::Ok:
      break;
    case LineChannel::Status::Timeout:
      channel.write_reply(replies::timeout());
      channel.close();
      outcome.end = ConnectionOutcome::End::Timeout;
      return outcome;
    case LineChannel::Status::TooLong:
      channel.write_reply(replies::line_too_long());
      channel.close();
      outcome.end = ConnectionOutcome::End::LineTooLong;
      return outcome;
    case LineChannel::Status::Closed:
      outcome.end = ConnectionOutcome::End::PeerClosed;
      return outcome;
    }

    auto t = step(current, in.line, ctx.policy, ctx.credentials, ctx.next_id);

    if (auto* enqueue = std::get_if<action::EnqueueMessage>(&t.action)) {
      SpooledMessage message{enqueue->queue_id, ctx.now(), enqueue->envelope,
                             enqueue->authenticated_as, enqueue->raw_data};
      try {
        ctx.sink.store(message);
      } catch (const SpoolIoError& e) {
        log_line(ctx.log, std::string("spool failure: ") + e.what());
        channel.write_reply(replies::local_error());
        channel.close();
        outcome.end = ConnectionOutcome::End::SpoolFailure;
        return outcome;
      }
      ++outcome.messages_spooled;
      log_line(ctx.log, "queued " + enqueue->queue_id.str() + " from <" +
                            enqueue->envelope.reverse_path.str() + ">");
    }

    if (t.reply && !channel.write_reply(*t.reply)) {
      return outcome;
    }
    current = std::move(t.next_state);

    if (std::holds_alternative<action::CloseConnection>(t.action)) {
      channel.close();
      outcome.end = ConnectionOutcome::End::Quit;
      return outcome;
    }
  }
}

// ---------------------------------------------------------------------------

Server::Server(Policy policy, CredentialStore credentials, MessageSink& sink,
               ServerOptions options)
    : policy_(std::move(policy)), credentials_(std::move(credentials)), sink_(sink),
      options_(std::move(options)),
      ids_(options_.seed ? QueueIdGenerator(*options_.seed) : QueueIdGenerator()) {}

Server::~Server() { stop(); }

void Server::start() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* found = nullptr;
  const auto service = std::to_string(options_.port);
  const char* node = options_.bind_address.empty() ? nullptr : options_.bind_address.c_str();
  if (int rc = ::getaddrinfo(node, service.c_str(), &hints, &found); rc != 0) {
    throw BindError("cannot resolve bind address " + options_.bind_address + ": " +
                    ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> list(found, ::freeaddrinfo);

  std::string error = "no usable address";
  for (auto* ai = list.get(); ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      error = std::strerror(errno);
      continue;
    }
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 128) == 0) {
      listen_fd_ = fd;
      break;
    }
    error = std::strerror(errno);
    ::close(fd);
  }
  if (listen_fd_ < 0) {
    throw BindError("cannot listen on " + options_.bind_address + ":" + service +
                    ": " + error);
  }

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port_ = addr.ss_family == AF_INET6
                    ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                    : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);

  log_line(options_.log, "listening on " + options_.bind_address + ":" +
                             std::to_string(bound_port_) + " (" +
                             std::string(to_string(policy_.mode())) + " mode)");
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (stopping_.exchange(true)) {
    return;
  }
  if (acceptor_.joinable()) {
    acceptor_.join();
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::map<std::uint64_t, std::thread> workers;
  {
    std::lock_guard guard(conn_mutex_);
    for (auto& [id, channel] : active_) {
      channel->shutdown();
    }
    workers.swap(workers_);
  }
  for (auto& [id, t] : workers) {
    t.join();
  }
}

QueueId Server::next_id() {
  std::lock_guard guard(id_mutex_);
  return ids_.next();
}

void Server::reap_finished() {
  std::vector<std::thread> done;
  {
    std::lock_guard guard(conn_mutex_);
    for (auto id : finished_) {
      auto it = workers_.find(id);
      if (it != workers_.end()) {
        done.push_back(std::move(it->second));
        workers_.erase(it);
      }
    }
    finished_.clear();
  }
  for (auto& t : done) {
    t.join();
  }
}

void Server::accept_loop() {
  while (!stopping_.load()) {
    reap_finished();
    pollfd pfd{listen_fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, 100);
    if (rc <= 0) {
      continue;
    }
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      continue;
    }
    auto channel = std::make_unique<TcpChannel>(fd);

    std::lock_guard guard(conn_mutex_);
    if (active_.size() >= options_.max_connections) {
      channel->write_reply(replies::too_many_connections());
      log_line(options_.log, "connection refused: limit reached");
      continue;
    }
    const auto id = next_conn_id_++;
    active_.emplace(id, channel.get());
    workers_.emplace(id, std::thread([this, id, ch = std::move(channel)]() mutable {
                       handle(id, std::move(ch));
                     }));
  }
}

void Server::handle(std::uint64_t id, std::unique_ptr<TcpChannel> channel) {
  const auto peer = channel->peer();
  log_line(options_.log, "connection from " + peer);
  ConnectionContext ctx{policy_, credentials_, [this] { return next_id(); }, sink_,
                        [] { return std::chrono::system_clock::now(); }, options_.log};
  try {
    run_connection(*channel, ctx);
  } catch (const std::exception& e) {
    log_line(options_.log, std::string("connection error: ") + e.what());
  }
  ++served_;
  std::lock_guard guard(conn_mutex_);
  active_.erase(id);
  channel.reset();
  finished_.push_back(id);
}

void serve(const Policy& policy, const CredentialStore& credentials,
           const std::filesystem::path& spool_dir, const ServerOptions& options,
           const std::atomic<bool>& stop) {
  std::error_code ec;
  if (!std::filesystem::is_directory(spool_dir, ec)) {
    throw SpoolIoError("spool directory does not exist: " + spool_dir.string());
  }
  DirectorySpool sink(spool_dir);
  Server server(policy, credentials, sink, options);
  server.start();
  while (!stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.stop();
}

} // namespace smtpguard
