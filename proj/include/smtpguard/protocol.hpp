#pragma once

// SMTP wire vocabulary: commands, coded replies and mailbox addresses.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smtpguard/error.hpp"

namespace smtpguard {

inline constexpr std::size_t max_line_length = 1000;

/// A mailbox as it appears between the angle brackets of MAIL FROM / RCPT TO.
/// Always non-empty with exactly one '@' and no whitespace, brackets or
/// control characters.
class Address {
public:
  /// Throws ProtocolError(MalformedAddress).
  static Address parse(std::string_view text);

  const std::string& str() const noexcept { return value_; }
  std::string_view local_part() const;
  std::string_view domain() const;

  auto operator<=>(const Address&) const = default;

private:
  explicit Address(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

namespace cmd {
struct Helo {
  std::string host;
  bool operator==(const Helo&) const = default;
};
struct Ehlo {
  std::string host;
  bool operator==(const Ehlo&) const = default;
};
struct AuthLogin {
  bool operator==(const AuthLogin&) const = default;
};
struct AuthPlain {
  std::optional<std::string> blob;
  bool operator==(const AuthPlain&) const = default;
};
struct Mail {
  Address reverse_path;
  bool operator==(const Mail&) const = default;
};
struct Rcpt {
  Address forward_path;
  bool operator==(const Rcpt&) const = default;
};
struct Data {
  bool operator==(const Data&) const = default;
};
struct Quit {
  bool operator==(const Quit&) const = default;
};
struct Rset {
  bool operator==(const Rset&) const = default;
};
struct Noop {
  bool operator==(const Noop&) const = default;
};
struct StartTls {
  bool operator==(const StartTls&) const = default;
};
// Anything else. The verb is stored uppercase; arguments are dropped. An
// AUTH with an unsupported mechanism is reported as verb "AUTH <MECH>".
struct Unknown {
  std::string verb;
  bool operator==(const Unknown&) const = default;
};
} // namespace cmd

using Command = std::variant<cmd::Helo, cmd::Ehlo, cmd::AuthLogin,
                             cmd::AuthPlain, cmd::Mail, cmd::Rcpt, cmd::Data,
                             cmd::Quit, cmd::Rset, cmd::Noop, cmd::StartTls,
                             cmd::Unknown>;

/// Parses one command line (no trailing CRLF). Verbs are case-insensitive.
/// Unrecognized verbs yield cmd::Unknown; the session decides the reply.
/// Throws ProtocolError: LineTooLong (> max_line_length), MalformedAddress
/// (MAIL/RCPT without a parseable <addr>), MalformedCommand (embedded CR, LF
/// or NUL).
Command parse_command(std::string_view line);

/// Canonical uppercase wire form, without CRLF.
std::string serialize(const Command& command);

struct EnhancedStatus {
  int klass = 2;
  int subject = 0;
  int detail = 0;

  static std::optional<EnhancedStatus> parse(std::string_view text);
  std::string str() const;

  auto operator<=>(const EnhancedStatus&) const = default;
};

class Reply {
public:
  /// Throws InvalidArgument unless 200 <= code <= 599, lines is non-empty,
  /// no line contains CR or LF, and the enhanced class matches the first
  /// digit of the code and is 2, 4 or 5.
  Reply(int code, std::optional<EnhancedStatus> enhanced,
        std::vector<std::string> lines);
  Reply(int code, std::optional<EnhancedStatus> enhanced, std::string line)
      : Reply(code, enhanced, std::vector<std::string>{std::move(line)}) {}

  int code() const noexcept { return code_; }
  int code_class() const noexcept { return code_ / 100; }
  const std::optional<EnhancedStatus>& enhanced() const noexcept {
    return enhanced_;
  }
  const std::vector<std::string>& lines() const noexcept { return lines_; }

  bool operator==(const Reply&) const = default;

private:
  int code_;
  std::optional<EnhancedStatus> enhanced_;
  std::vector<std::string> lines_;
};

/// Wire lines without terminators: "250-..." on all but the last line,
/// "250 ..." on the last. The enhanced status, when present, prefixes the
/// text of every line.
std::vector<std::string> render_reply_lines(const Reply& reply);

/// The full wire form with CRLF after every line.
std::string render_reply(const Reply& reply);

/// Inverse of render_reply_lines. Throws ProtocolError(MalformedReply) on a
/// code mismatch between lines, bad separators, or an incomplete reply.
Reply parse_reply(std::span<const std::string> lines);

/// Same, splitting `text` on LF (an optional CR before it is dropped).
Reply parse_reply(std::string_view text);

struct ReplyLineHead {
  int code;
  bool last;
};

/// Reads the "ddd-" / "ddd " prefix of a single reply line.
std::optional<ReplyLineHead> peek_reply_line(std::string_view line);

} // namespace smtpguard
