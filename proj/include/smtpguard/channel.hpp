#pragma once

// Line-oriented byte streams. The same contract is implemented over TCP
// sockets and over the in-memory pipes of the test harness.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smtpguard/clock.hpp"
#include "smtpguard/protocol.hpp"

namespace smtpguard {

class LineChannel {
public:
  enum class Status { Ok, Timeout, Closed, TooLong };

  struct ReadResult {
    Status status;
    std::string line; // without the terminator
  };

  static constexpr std::size_t default_max_line_bytes = 64 * 1024;

  LineChannel() = default;
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  virtual ~LineChannel() = default;

  /// Reads one line ending in LF; a CR before the LF is dropped. The timeout
  /// is measured on the channel's clock.
  ReadResult read_line(std::chrono::milliseconds timeout);

  bool write(std::string_view bytes);
  bool write_line(std::string_view line);
  bool write_reply(const Reply& reply);

  virtual void close() = 0;

  void set_max_line_bytes(std::size_t n) noexcept { max_line_bytes_ = n; }

  /// When enabled, every byte received is appended to captured().
  void set_capture(bool on) noexcept { capture_ = on; }
  const std::string& captured() const noexcept { return captured_; }

protected:
  enum class RecvStatus { Data, Timeout, Closed };

  /// Appends at least one byte to `out`, or reports why it could not.
  virtual RecvStatus receive(std::string& out, Clock::Duration deadline) = 0;
  virtual bool send(std::string_view bytes) = 0;
  virtual Clock& clock() = 0;

private:
  std::string buffer_;
  std::string captured_;
  std::size_t max_line_bytes_ = default_max_line_bytes;
  bool capture_ = false;
};

struct ReplyRead {
  LineChannel::Status status = LineChannel::Status::Ok;
  std::vector<std::string> lines; // raw lines as received
  std::optional<Reply> reply;     // set when a well-formed reply was read
};

/// Reads continuation lines until the final "ddd " line.
ReplyRead read_reply(LineChannel& channel, std::chrono::milliseconds timeout);

class TcpChannel final : public LineChannel {
public:
  /// Takes ownership of a connected socket.
  explicit TcpChannel(int fd);
  ~TcpChannel() override;

  /// Throws std::system_error (or std::runtime_error for resolution
  /// failures) when the connection cannot be established in time.
  static std::unique_ptr<TcpChannel> connect(const std::string& host,
                                             std::uint16_t port,
                                             std::chrono::milliseconds timeout);

  void close() override;
  /// Unblocks a concurrent reader; safe from another thread.
  void shutdown();

  std::string peer() const;

protected:
  RecvStatus receive(std::string& out, Clock::Duration deadline) override;
  bool send(std::string_view bytes) override;
  Clock& clock() override { return SteadyClock::instance(); }

private:
  std::mutex fd_mutex_; // close() vs. shutdown() from another thread
  int fd_;
};

} // namespace smtpguard
