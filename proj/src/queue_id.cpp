#include "smtpguard/queue_id.hpp"

#include <algorithm>
#include <cstdio>

#include "smtpguard/error.hpp"

namespace smtpguard {

bool QueueId::is_valid(std::string_view text) noexcept {
  return text.size() == length &&
         std::all_of(text.begin(), text.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'F');
         });
}

QueueId QueueId::parse(std::string_view text) {
  if (!is_valid(text)) {
    throw InvalidArgument("not a queue id: " + std::string(text));
  }
  return QueueId(std::string(text));
}

QueueIdGenerator::QueueIdGenerator() {
  std::random_device rd;
  engine_.seed((std::uint64_t{rd()} << 32) | rd());
}

QueueIdGenerator::QueueIdGenerator(std::uint64_t seed) : engine_(seed) {}

QueueId QueueIdGenerator::next() {
  constexpr std::uint64_t mask = (std::uint64_t{1} << (4 * QueueId::length)) - 1;
  std::uint64_t value = 0;
  do {
    value = engine_() & mask;
  } while (!issued_.insert(value).second);

  char buf[QueueId::length + 1];
  std::snprintf(buf, sizeof buf, "%011llX", static_cast<unsigned long long>(value));
  return QueueId::parse(buf);
}

} // namespace smtpguard
