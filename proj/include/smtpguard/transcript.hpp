#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace smtpguard {

enum class Direction { Client, Server, Note };

struct TranscriptEntry {
  Direction direction;
  std::string line;
  bool operator==(const TranscriptEntry&) const = default;
};

using Transcript = std::vector<TranscriptEntry>;

/// "C", "S" or "#".
std::string_view direction_tag(Direction d);
Direction parse_direction_tag(std::string_view tag);

} // namespace smtpguard
