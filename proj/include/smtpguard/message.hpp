#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace smtpguard {

/// Headers are passed through verbatim; no folding or MIME handling.
struct MailMessage {
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body; // lines separated by "\n" or "\r\n"

  /// RFC 5322 text with CRLF line endings: headers, an empty line, then the
  /// body. A non-empty body always ends with CRLF.
  std::string to_wire() const;

  bool operator==(const MailMessage&) const = default;
};

/// Doubles the leading '.' of every line that starts with one. Line endings
/// are preserved; the "." terminator is not appended.
std::string dot_stuff(std::string_view body);

/// Removes one leading '.' from every line that starts with one.
std::string dot_unstuff(std::string_view wire);

} // namespace smtpguard
