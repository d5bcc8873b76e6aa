#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "smtpguard/channel.hpp"
#include "smtpguard/credentials.hpp"
#include "smtpguard/queue_id.hpp"
#include "smtpguard/session.hpp"
#include "smtpguard/spool.hpp"

namespace smtpguard {

using Logger = std::function<void(std::string_view)>;

struct ConnectionContext {
  const Policy& policy;
  const CredentialStore& credentials;
  QueueIdSource next_id;
  MessageSink& sink;
  std::function<std::chrono::system_clock::time_point()> now =
      [] { return std::chrono::system_clock::now(); };
  Logger log;
};

struct ConnectionOutcome {
  enum class End { Quit, Timeout, PeerClosed, SpoolFailure, LineTooLong };
  End end = End::PeerClosed;
  std::size_t messages_spooled = 0;
};

/// Greets, then feeds each received line through step() until QUIT, the
/// per-command timeout, a spool failure or the peer going away. Messages
/// are handed to the sink before their 250 reply is written.
ConnectionOutcome run_connection(LineChannel& channel, const ConnectionContext& ctx);

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 2525; // 0 picks an ephemeral port
  std::size_t max_connections = 64;
  std::optional<std::uint64_t> seed; // deterministic queue ids
  Logger log;
};

/// TCP front end: one thread per connection, bounded by max_connections.
/// Connections beyond the cap receive "421 4.3.2" and are closed.
class Server {
public:
  Server(Policy policy, CredentialStore credentials, MessageSink& sink,
         ServerOptions options);
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server();

  /// Binds and starts accepting. Throws BindError.
  void start();
  /// Stops accepting, aborts open connections and joins every thread.
  void stop();

  std::uint16_t port() const noexcept { return bound_port_; }
  std::size_t connections_served() const noexcept { return served_.load(); }

private:
  void accept_loop();
  void handle(std::uint64_t id, std::unique_ptr<TcpChannel> channel);
  void reap_finished();
  QueueId next_id();

  Policy policy_;
  CredentialStore credentials_;
  MessageSink& sink_;
  ServerOptions options_;

  int listen_fd_ = -1;
  std::uint16_t bound_port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> served_{0};
  std::thread acceptor_;

  std::mutex id_mutex_;
  QueueIdGenerator ids_;

  std::mutex conn_mutex_;
  std::uint64_t next_conn_id_ = 0;
  std::map<std::uint64_t, TcpChannel*> active_;
  std::map<std::uint64_t, std::thread> workers_;
  std::vector<std::uint64_t> finished_;
};

/// Runs a server spooling into `spool_dir` until `stop` becomes true.
void serve(const Policy& policy, const CredentialStore& credentials,
           const std::filesystem::path& spool_dir, const ServerOptions& options,
           const std::atomic<bool>& stop);

} // namespace smtpguard
