#include "smtpguard/clock.hpp"

#include <algorithm>

namespace smtpguard {

Clock::Duration SteadyClock::now() const {
  return std::chrono::duration_cast<Duration>(
      std::chrono::steady_clock::now().time_since_epoch());
}

void SteadyClock::wait_until(std::unique_lock<std::mutex>& lock,
                             std::condition_variable& cv, Duration deadline) {
  cv.wait_until(lock, std::chrono::steady_clock::time_point(
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              deadline)));
}

SteadyClock& SteadyClock::instance() {
  static SteadyClock clock;
  return clock;
}

Clock::Duration VirtualClock::now() const {
  std::lock_guard guard(mutex_);
  return now_;
}

void VirtualClock::wait_until(std::unique_lock<std::mutex>& lock,
                              std::condition_variable& cv, Duration deadline) {
  {
    std::lock_guard guard(mutex_);
    // Registration and the time check share mutex_, so an advance() either
    // sees this waiter or happened before the check below.
    if (now_ >= deadline) {
      return;
    }
    waiters_.push_back({lock.mutex(), &cv});
    ++waits_started_;
    waiters_changed_.notify_all();
  }
  cv.wait(lock);
  std::lock_guard guard(mutex_);
  auto it = std::find_if(waiters_.begin(), waiters_.end(),
                         [&](const Waiter& w) { return w.cv == &cv; });
  if (it != waiters_.end()) {
    waiters_.erase(it);
  }
  waiters_changed_.notify_all();
}

void VirtualClock::advance(Duration by) {
  std::vector<Waiter> to_wake;
  {
    std::lock_guard guard(mutex_);
    now_ += by;
    to_wake = waiters_;
  }
  for (const auto& w : to_wake) {
    std::lock_guard guard(*w.mutex);
    w.cv->notify_all();
  }
}

std::uint64_t VirtualClock::waits_started() const {
  std::lock_guard guard(mutex_);
  return waits_started_;
}

bool VirtualClock::wait_for_waiters(std::size_t count,
                                    std::chrono::milliseconds limit) {
  std::unique_lock lock(mutex_);
  return waiters_changed_.wait_for(lock, limit,
                                   [&] { return waiters_.size() >= count; });
}

} // namespace smtpguard
