#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>

namespace smtpguard {

/// Eleven uppercase hexadecimal characters, e.g. 492381B9295.
class QueueId {
public:
  static constexpr std::size_t length = 11;

  /// Throws InvalidArgument unless `text` matches ^[0-9A-F]{11}$.
  static QueueId parse(std::string_view text);
  static bool is_valid(std::string_view text) noexcept;

  const std::string& str() const noexcept { return value_; }
  auto operator<=>(const QueueId&) const = default;

private:
  explicit QueueId(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

/// Random 44-bit ids, never repeating within one generator's lifetime.
/// Seeded generators are deterministic; not thread-safe.
class QueueIdGenerator {
public:
  QueueIdGenerator();
  explicit QueueIdGenerator(std::uint64_t seed);

  QueueId next();
  std::size_t issued() const noexcept { return issued_.size(); }

private:
  std::mt19937_64 engine_;
  std::unordered_set<std::uint64_t> issued_;
};

inline QueueId next_queue_id(QueueIdGenerator& generator) {
  return generator.next();
}

} // namespace smtpguard
