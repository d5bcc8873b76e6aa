#include "smtpguard/protocol.hpp"

#include <algorithm>
#include <cctype>

#include "text_util.hpp"

namespace smtpguard {

using detail::iequals;
using detail::istarts_with;
using detail::to_upper;
using detail::trim;

namespace {

bool is_address_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return u > 0x20 && u != 0x7f && c != '<' && c != '>';
}

bool has_line_breaks(std::string_view s) {
  return s.find_first_of(std::string_view("\r\n\0", 3)) != std::string_view::npos;
}

// Parses "<addr>" optionally followed by SP parameters (ignored).
Address bracketed_address(std::string_view rest) {
  rest = trim(rest);
  if (rest.empty() || rest.front() != '<') {
    throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                        "address must be enclosed in angle brackets");
  }
  auto close = rest.find('>');
  if (close == std::string_view::npos) {
    throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                        "unterminated address");
  }
  auto params = rest.substr(close + 1);
  if (!params.empty() && params.front() != ' ') {
    throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                        "junk after address");
  }
  return Address::parse(rest.substr(1, close - 1));
}

Command parse_auth(std::string_view args) {
  args = trim(args);
  auto space = args.find(' ');
  auto mech = args.substr(0, space);
  auto rest = space == std::string_view::npos ? std::string_view{}
                                              : trim(args.substr(space + 1));
  if (iequals(mech, "LOGIN")) {
    return cmd::AuthLogin{};
  }
  if (iequals(mech, "PLAIN")) {
    if (rest.empty()) {
      return cmd::AuthPlain{};
    }
    return cmd::AuthPlain{std::string(rest)};
  }
  if (mech.empty()) {
    return cmd::Unknown{"AUTH"};
  }
  return cmd::Unknown{"AUTH " + to_upper(mech)};
}

} // namespace

Address Address::parse(std::string_view text) {
  if (text.empty()) {
    throw ProtocolError(ProtocolError::Kind::MalformedAddress, "empty address");
  }
  if (!std::all_of(text.begin(), text.end(), is_address_char)) {
    throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                        "illegal character in address");
  }
  auto at = text.find('@');
  if (at == std::string_view::npos || text.find('@', at + 1) != std::string_view::npos) {
    throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                        "address must contain exactly one '@'");
  }
  if (at == 0 || at + 1 == text.size()) {
    throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                        "empty local part or domain");
  }
  return Address(std::string(text));
}

std::string_view Address::local_part() const {
  return std::string_view(value_).substr(0, value_.find('@'));
}

std::string_view Address::domain() const {
  return std::string_view(value_).substr(value_.find('@') + 1);
}

Command parse_command(std::string_view line) {
  if (line.size() > max_line_length) {
    throw ProtocolError(ProtocolError::Kind::LineTooLong, "line too long");
  }
  if (has_line_breaks(line)) {
    throw ProtocolError(ProtocolError::Kind::MalformedCommand,
                        "embedded CR, LF or NUL");
  }

  auto space = line.find(' ');
  auto verb = line.substr(0, space);
  auto args = space == std::string_view::npos ? std::string_view{}
                                              : line.substr(space + 1);

  if (iequals(verb, "HELO")) {
    return cmd::Helo{std::string(trim(args))};
  }
  if (iequals(verb, "EHLO")) {
    return cmd::Ehlo{std::string(trim(args))};
  }
  if (iequals(verb, "MAIL")) {
    auto rest = trim(args);
    if (!istarts_with(rest, "FROM:")) {
      throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                          "expected MAIL FROM:<address>");
    }
    return cmd::Mail{bracketed_address(rest.substr(5))};
  }
  if (iequals(verb, "RCPT")) {
    auto rest = trim(args);
    if (!istarts_with(rest, "TO:")) {
      throw ProtocolError(ProtocolError::Kind::MalformedAddress,
                          "expected RCPT TO:<address>");
    }
    return cmd::Rcpt{bracketed_address(rest.substr(3))};
  }
  if (iequals(verb, "AUTH")) {
    return parse_auth(args);
  }
  if (iequals(verb, "DATA")) {
    return cmd::Data{};
  }
  if (iequals(verb, "QUIT")) {
    return cmd::Quit{};
  }
  if (iequals(verb, "RSET")) {
    return cmd::Rset{};
  }
  if (iequals(verb, "NOOP")) {
    return cmd::Noop{};
  }
  if (iequals(verb, "STARTTLS")) {
    return cmd::StartTls{};
  }
  return cmd::Unknown{to_upper(verb)};
}

namespace {

struct Serializer {
  std::string operator()(const cmd::Helo& c) const {
    return c.host.empty() ? "HELO" : "HELO " + c.host;
  }
  std::string operator()(const cmd::Ehlo& c) const {
    return c.host.empty() ? "EHLO" : "EHLO " + c.host;
  }
  std::string operator()(const cmd::AuthLogin&) const { return "AUTH LOGIN"; }
  std::string operator()(const cmd::AuthPlain& c) const {
    return c.blob ? "AUTH PLAIN " + *c.blob : "AUTH PLAIN";
  }
  std::string operator()(const cmd::Mail& c) const {
    return "MAIL FROM:<" + c.reverse_path.str() + ">";
  }
  std::string operator()(const cmd::Rcpt& c) const {
    return "RCPT TO:<" + c.forward_path.str() + ">";
  }
  std::string operator()(const cmd::Data&) const { return "DATA"; }
  std::string operator()(const cmd::Quit&) const { return "QUIT"; }
  std::string operator()(const cmd::Rset&) const { return "RSET"; }
  std::string operator()(const cmd::Noop&) const { return "NOOP"; }
  std::string operator()(const cmd::StartTls&) const { return "STARTTLS"; }
  std::string operator()(const cmd::Unknown& c) const { return c.verb; }
};

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  });
}

} // namespace

std::string serialize(const Command& command) {
  return std::visit(Serializer{}, command);
}

std::optional<EnhancedStatus> EnhancedStatus::parse(std::string_view text) {
  auto d1 = text.find('.');
  if (d1 == std::string_view::npos) {
    return std::nullopt;
  }
  auto d2 = text.find('.', d1 + 1);
  if (d2 == std::string_view::npos) {
    return std::nullopt;
  }
  auto a = text.substr(0, d1);
  auto b = text.substr(d1 + 1, d2 - d1 - 1);
  auto c = text.substr(d2 + 1);
  if (a.size() != 1 || !all_digits(a) || !all_digits(b) || !all_digits(c) ||
      b.size() > 3 || c.size() > 3) {
    return std::nullopt;
  }
  EnhancedStatus status{a[0] - '0', std::stoi(std::string(b)),
                        std::stoi(std::string(c))};
  if (status.klass != 2 && status.klass != 4 && status.klass != 5) {
    return std::nullopt;
  }
  return status;
}

std::string EnhancedStatus::str() const {
  return std::to_string(klass) + "." + std::to_string(subject) + "." +
         std::to_string(detail);
}

Reply::Reply(int code, std::optional<EnhancedStatus> enhanced,
             std::vector<std::string> lines)
    : code_(code), enhanced_(enhanced), lines_(std::move(lines)) {
  if (code_ < 200 || code_ > 599) {
    throw InvalidArgument("reply code out of range: " + std::to_string(code_));
  }
  if (lines_.empty()) {
    throw InvalidArgument("reply needs at least one line");
  }
  for (const auto& line : lines_) {
    if (has_line_breaks(line)) {
      throw InvalidArgument("reply text contains a line break");
    }
  }
  if (enhanced_ && enhanced_->klass != code_ / 100) {
    throw InvalidArgument("enhanced status class does not match reply code");
  }
  // Enhanced status codes only exist for success and failure classes.
  if (enhanced_ && enhanced_->klass == 3) {
    throw InvalidArgument("3xx replies carry no enhanced status");
  }
}

std::vector<std::string> render_reply_lines(const Reply& reply) {
  std::vector<std::string> out;
  out.reserve(reply.lines().size());
  const auto code = std::to_string(reply.code());
  const auto prefix = reply.enhanced() ? reply.enhanced()->str() + " " : "";
  for (std::size_t i = 0; i < reply.lines().size(); ++i) {
    const bool last = i + 1 == reply.lines().size();
    out.push_back(code + (last ? ' ' : '-') + prefix + reply.lines()[i]);
  }
  return out;
}

std::string render_reply(const Reply& reply) {
  std::string wire;
  for (const auto& line : render_reply_lines(reply)) {
    wire += line;
    wire += "\r\n";
  }
  return wire;
}

std::optional<ReplyLineHead> peek_reply_line(std::string_view line) {
  if (line.size() < 3 || !all_digits(line.substr(0, 3))) {
    return std::nullopt;
  }
  int code = std::stoi(std::string(line.substr(0, 3)));
  if (line.size() == 3) {
    return ReplyLineHead{code, true};
  }
  if (line[3] == ' ') {
    return ReplyLineHead{code, true};
  }
  if (line[3] == '-') {
    return ReplyLineHead{code, false};
  }
  return std::nullopt;
}

Reply parse_reply(std::span<const std::string> lines) {
  auto malformed = [](const std::string& why) {
    return ProtocolError(ProtocolError::Kind::MalformedReply, why);
  };
  if (lines.empty()) {
    throw malformed("empty reply");
  }

  std::optional<int> code;
  std::vector<std::string_view> texts;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    auto head = peek_reply_line(line);
    if (!head) {
      throw malformed("bad reply line: " + line);
    }
    if (code && *code != head->code) {
      throw malformed("reply code changes between lines");
    }
    code = head->code;
    const bool last = i + 1 == lines.size();
    if (head->last != last) {
      throw malformed(last ? "reply is incomplete" : "text after final reply line");
    }
    texts.push_back(line.size() > 3 ? std::string_view(line).substr(4)
                                    : std::string_view{});
  }
  if (*code < 200 || *code > 599) {
    throw malformed("reply code out of range");
  }

  // An enhanced status counts only if the first line carries one of the
  // matching class; it is then stripped wherever it repeats.
  std::optional<EnhancedStatus> enhanced;
  {
    auto first = texts.front();
    auto token = first.substr(0, first.find(' '));
    auto status = EnhancedStatus::parse(token);
    if (status && status->klass == *code / 100) {
      enhanced = status;
    }
  }

  std::vector<std::string> out;
  out.reserve(texts.size());
  const auto prefix = enhanced ? enhanced->str() : std::string{};
  for (auto text : texts) {
    if (enhanced && text.substr(0, prefix.size()) == prefix &&
        (text.size() == prefix.size() || text[prefix.size()] == ' ')) {
      text.remove_prefix(std::min(text.size(), prefix.size() + 1));
    }
    out.emplace_back(text);
  }
  return Reply(*code, enhanced, std::move(out));
}

Reply parse_reply(std::string_view text) {
  std::vector<std::string> lines;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    lines.emplace_back(line);
    if (nl == std::string_view::npos) {
      break;
    }
    text.remove_prefix(nl + 1);
  }
  return parse_reply(std::span<const std::string>(lines));
}

} // namespace smtpguard
