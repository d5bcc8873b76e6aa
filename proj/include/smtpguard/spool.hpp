#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "smtpguard/queue_id.hpp"
#include "smtpguard/session.hpp"

namespace smtpguard {

struct SpooledMessage {
  QueueId queue_id;
  std::chrono::system_clock::time_point received_at;
  Envelope envelope;
  std::optional<std::string> authenticated_as;
  std::string raw_data; // dot-unstuffed, CRLF line endings

  /// Metadata written to <queue_id>.json (everything but raw_data).
  nlohmann::json metadata() const;
};

/// RFC 3339 UTC timestamp with second precision, e.g. 2009-10-05T13:56:45Z.
std::string format_rfc3339(std::chrono::system_clock::time_point t);
std::chrono::system_clock::time_point parse_rfc3339(const std::string& text);

/// Receives accepted messages. store() must not return before the message
/// is durable; it throws SpoolIoError otherwise.
class MessageSink {
public:
  virtual ~MessageSink() = default;
  virtual void store(const SpooledMessage& message) = 0;
};

/// Writes <queue_id>.eml and <queue_id>.json into `spool_dir` via
/// write-temp-fsync-rename. Returns the path of the .eml file.
std::filesystem::path spool(const SpooledMessage& message,
                            const std::filesystem::path& spool_dir);

/// Reads a spooled message back from its two files.
SpooledMessage load_spooled(const std::filesystem::path& spool_dir,
                            const QueueId& id);

class DirectorySpool final : public MessageSink {
public:
  explicit DirectorySpool(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void store(const SpooledMessage& message) override;
  const std::filesystem::path& directory() const noexcept { return dir_; }

private:
  std::filesystem::path dir_;
  std::mutex mutex_;
};

class MemorySpool final : public MessageSink {
public:
  void store(const SpooledMessage& message) override;
  std::vector<SpooledMessage> messages() const;

private:
  mutable std::mutex mutex_;
  std::vector<SpooledMessage> messages_;
};

} // namespace smtpguard
