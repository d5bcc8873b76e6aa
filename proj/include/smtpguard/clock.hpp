#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <utility>
#include <vector>

namespace smtpguard {

/// Time source used for read deadlines. Durations are measured from an
/// arbitrary, clock-specific epoch.
class Clock {
public:
  using Duration = std::chrono::nanoseconds;

  virtual ~Clock() = default;
  virtual Duration now() const = 0;

  /// Blocks on `cv` (with `lock` held on entry and exit) until notified or
  /// until now() >= deadline. Spurious returns are allowed.
  virtual void wait_until(std::unique_lock<std::mutex>& lock,
                          std::condition_variable& cv, Duration deadline) = 0;
};

class SteadyClock final : public Clock {
public:
  Duration now() const override;
  void wait_until(std::unique_lock<std::mutex>& lock, std::condition_variable& cv,
                  Duration deadline) override;

  static SteadyClock& instance();
};

/// Manually advanced clock. Waiters are woken whenever time moves.
class VirtualClock final : public Clock {
public:
  Duration now() const override;
  void wait_until(std::unique_lock<std::mutex>& lock, std::condition_variable& cv,
                  Duration deadline) override;

  void advance(Duration by);

  /// Blocks (in real time, up to `limit`) until at least `count` threads
  /// are parked in wait_until. Returns false on expiry.
  bool wait_for_waiters(std::size_t count, std::chrono::milliseconds limit);

  /// Total number of waits that have parked so far.
  std::uint64_t waits_started() const;

private:
  struct Waiter {
    std::mutex* mutex;
    std::condition_variable* cv;
  };

  mutable std::mutex mutex_;
  std::condition_variable waiters_changed_;
  Duration now_{0};
  std::uint64_t waits_started_ = 0;
  std::vector<Waiter> waiters_;
};

} // namespace smtpguard
