#include "smtpguard/session.hpp"

#include <algorithm>

#include "smtpguard/base64.hpp"
#include "text_util.hpp"

namespace smtpguard {

std::string_view to_string(PolicyMode mode) {
  return mode == PolicyMode::Open ? "open" : "auth";
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(PolicyMode mode, std::string server_hostname)
    : mode_(mode), hostname_(std::move(server_hostname)),
      extensions_(default_extensions()) {
  if (hostname_.empty()) {
    throw InvalidArgument("server hostname must not be empty");
  }
  if (hostname_.find_first_of(" \r\n") != std::string::npos) {
    throw InvalidArgument("server hostname must be a single token");
  }
}

std::vector<std::string> Policy::default_extensions() {
  return {"PIPELINING",       "SIZE 8192000",        "ETRN",
          "STARTTLS",         "AUTH LOGIN PLAIN",    "AUTH=LOGIN PLAIN",
          "ENHANCEDSTATUSCODES", "8BITMIME",         "DSN"};
}

Policy& Policy::set_banner_tag(std::string tag) {
  if (tag.find_first_of("\r\n") != std::string::npos) {
    throw InvalidArgument("banner tag must not contain line breaks");
  }
  banner_tag_ = std::move(tag);
  return *this;
}

Policy& Policy::set_command_timeout(std::chrono::seconds timeout) {
  if (timeout.count() <= 0) {
    throw InvalidArgument("command timeout must be positive");
  }
  timeout_ = timeout;
  return *this;
}

Policy& Policy::set_max_message_size(std::size_t bytes) {
  if (bytes == 0) {
    throw InvalidArgument("max message size must be positive");
  }
  max_size_ = bytes;
  for (auto& ext : extensions_) {
    if (detail::istarts_with(ext, "SIZE")) {
      ext = "SIZE " + std::to_string(bytes);
    }
  }
  return *this;
}

Policy& Policy::set_advertised_extensions(std::vector<std::string> extensions) {
  check_invariants(extensions);
  extensions_ = std::move(extensions);
  return *this;
}

void Policy::check_invariants(const std::vector<std::string>& extensions) const {
  for (const auto& ext : extensions) {
    if (ext.empty() || ext.find_first_of("\r\n") != std::string::npos) {
      throw InvalidArgument("bad extension keyword");
    }
    if (detail::istarts_with(ext, "SIZE ") &&
        ext.substr(5) != std::to_string(max_size_)) {
      throw InvalidArgument("advertised SIZE differs from max_message_size");
    }
  }
  if (mode_ == PolicyMode::AuthRequired &&
      std::find(extensions.begin(), extensions.end(), "AUTH LOGIN PLAIN") ==
          extensions.end()) {
    throw InvalidArgument("auth-required policy must advertise AUTH LOGIN PLAIN");
  }
}

// ---------------------------------------------------------------------------
// Replies

namespace replies {
namespace {
constexpr EnhancedStatus es(int k, int s, int d) { return {k, s, d}; }
} // namespace

Reply ok() { return {250, es(2, 0, 0), "Ok"}; }
Reply address_ok() { return {250, es(2, 1, 5), "Ok"}; }
Reply start_data() { return {354, std::nullopt, "End data with <CR><LF>.<CR><LF>"}; }
Reply queued(const QueueId& id) { return {250, es(2, 0, 0), "Ok: queued as " + id.str()}; }
Reply bye() { return {221, es(2, 0, 0), "Bye"}; }
Reply bad_sequence() { return {503, es(5, 5, 1), "Bad sequence of commands"}; }
Reply not_recognized() { return {500, es(5, 5, 2), "Command not recognized"}; }
Reply not_logged_in(const Address& sender) {
  return {553, es(5, 7, 1), sender.str() + ": Sender address rejected: not logged in"};
}
Reply auth_username_prompt() { return {334, std::nullopt, encode_base64("Username:")}; }
Reply auth_password_prompt() { return {334, std::nullopt, encode_base64("Password:")}; }
Reply auth_succeeded() { return {235, es(2, 7, 0), "Authentication successful"}; }
Reply auth_failed() { return {535, es(5, 7, 8), "Authentication failed"}; }
Reply tls_not_available() { return {454, es(4, 7, 0), "TLS not available"}; }
Reply timeout() { return {421, es(4, 4, 2), "Timeout"}; }
Reply too_many_connections() { return {421, es(4, 3, 2), "Too many connections"}; }
Reply local_error() { return {421, es(4, 3, 0), "Local error in processing"}; }
Reply line_too_long() { return {500, es(5, 5, 2), "Line too long"}; }
Reply message_too_big() { return {552, es(5, 3, 4), "Message size exceeds limit"}; }
} // namespace replies

namespace {

Reply syntax_error() { return {500, EnhancedStatus{5, 5, 2}, "Syntax error"}; }
Reply bad_sender_syntax() {
  return {501, EnhancedStatus{5, 1, 7}, "Bad sender address syntax"};
}
Reply bad_recipient_syntax() {
  return {501, EnhancedStatus{5, 1, 3}, "Bad recipient address syntax"};
}
Reply hello_syntax(std::string_view verb) {
  return {501, EnhancedStatus{5, 5, 4}, "Syntax: " + std::string(verb) + " hostname"};
}
Reply auth_syntax() { return {501, EnhancedStatus{5, 5, 4}, "Syntax: AUTH mechanism"}; }
Reply auth_undecodable() {
  return {501, EnhancedStatus{5, 5, 2}, "Cannot decode response"};
}
Reply auth_cancelled() {
  return {501, EnhancedStatus{5, 7, 0}, "Authentication cancelled"};
}
Reply auth_mechanism_unsupported() {
  return {504, EnhancedStatus{5, 5, 4}, "Unrecognized authentication type"};
}
Reply not_implemented() {
  return {502, EnhancedStatus{5, 5, 1}, "Command not implemented"};
}
Reply plain_prompt() { return {334, std::nullopt, ""}; }

Transition stay(const SessionState& s, Reply r) {
  return {s, std::move(r), action::None{}};
}

Transition go(SessionState s, Reply r) {
  return {std::move(s), std::move(r), action::None{}};
}

// Common view over the states that sit between commands.
struct CommandContext {
  bool greeted = false;
  std::string client_name;
  std::optional<std::string> user;
  const state::EnvelopeOpen* envelope = nullptr;
};

CommandContext context_of(const SessionState& s) {
  CommandContext ctx;
  if (auto g = std::get_if<state::Greeted>(&s)) {
    ctx.greeted = true;
    ctx.client_name = g->client_name;
  } else if (auto a = std::get_if<state::Authenticated>(&s)) {
    ctx.greeted = true;
    ctx.client_name = a->client_name;
    ctx.user = a->username;
  } else if (auto e = std::get_if<state::EnvelopeOpen>(&s)) {
    ctx.greeted = true;
    ctx.client_name = e->client_name;
    ctx.user = e->authenticated;
    ctx.envelope = e;
  }
  return ctx;
}

// The state a session returns to once an envelope is finished or reset.
SessionState idle_state(const std::string& client_name,
                        const std::optional<std::string>& user) {
  if (user) {
    return state::Authenticated{client_name, *user};
  }
  return state::Greeted{client_name};
}

Reply ehlo_reply(const Policy& policy) {
  std::vector<std::string> lines{policy.server_hostname()};
  const auto& ext = policy.advertised_extensions();
  lines.insert(lines.end(), ext.begin(), ext.end());
  return {250, std::nullopt, std::move(lines)};
}

// Commands processed outside AUTH and DATA sub-dialogues.
struct CommandStep {
  const SessionState& current;
  const Policy& policy;
  CommandContext ctx;

  Transition operator()(const cmd::Helo& c) const {
    if (c.host.empty()) {
      return stay(current, hello_syntax("HELO"));
    }
    return go(idle_state(c.host, ctx.user),
              Reply(250, std::nullopt, policy.server_hostname()));
  }

  Transition operator()(const cmd::Ehlo& c) const {
    if (c.host.empty()) {
      return stay(current, hello_syntax("EHLO"));
    }
    return go(idle_state(c.host, ctx.user), ehlo_reply(policy));
  }

  Transition operator()(const cmd::AuthLogin&) const {
    if (!std::holds_alternative<state::Greeted>(current)) {
      return stay(current, replies::bad_sequence());
    }
    return go(state::AuthAwaitingUsername{ctx.client_name},
              replies::auth_username_prompt());
  }

  Transition operator()(const cmd::AuthPlain&) const {
    // Initial responses are handled in step() where credentials are in scope.
    return stay(current, replies::bad_sequence());
  }

  Transition operator()(const cmd::Mail& c) const {
    if (!ctx.greeted || ctx.envelope) {
      return stay(current, replies::bad_sequence());
    }
    if (policy.mode() == PolicyMode::AuthRequired && !ctx.user) {
      return stay(current, replies::not_logged_in(c.reverse_path));
    }
    return go(state::EnvelopeOpen{ctx.client_name, ctx.user, c.reverse_path, {}},
              replies::address_ok());
  }

  Transition operator()(const cmd::Rcpt& c) const {
    if (!ctx.envelope) {
      return stay(current, replies::bad_sequence());
    }
    auto next = *ctx.envelope;
    next.forward_paths.push_back(c.forward_path);
    return go(std::move(next), replies::address_ok());
  }

  Transition operator()(const cmd::Data&) const {
    if (!ctx.envelope || ctx.envelope->forward_paths.empty()) {
      return stay(current, replies::bad_sequence());
    }
    const auto& e = *ctx.envelope;
    return go(state::ReceivingData{e.client_name, e.authenticated,
                                   Envelope{e.reverse_path, e.forward_paths},
                                   {}, false},
              replies::start_data());
  }

  Transition operator()(const cmd::Quit&) const {
    return {state::Closed{}, replies::bye(), action::CloseConnection{}};
  }

  Transition operator()(const cmd::Rset&) const {
    if (!ctx.greeted) {
      return stay(current, replies::ok());
    }
    return go(idle_state(ctx.client_name, ctx.user), replies::ok());
  }

  Transition operator()(const cmd::Noop&) const {
    return stay(current, replies::ok());
  }

  Transition operator()(const cmd::StartTls&) const {
    return stay(current, replies::tls_not_available());
  }

  Transition operator()(const cmd::Unknown& c) const {
    if (c.verb == "ETRN") {
      return stay(current, not_implemented());
    }
    if (c.verb == "AUTH") {
      return stay(current, auth_syntax());
    }
    if (c.verb.starts_with("AUTH ")) {
      if (!std::holds_alternative<state::Greeted>(current)) {
        return stay(current, replies::bad_sequence());
      }
      return stay(current, auth_mechanism_unsupported());
    }
    return stay(current, replies::not_recognized());
  }
};

// authzid NUL authcid NUL passwd
Transition finish_plain(const std::string& client_name, std::string_view blob,
                        const CredentialStore& credentials) {
  std::string decoded;
  try {
    decoded = decode_base64(blob);
  } catch (const ProtocolError&) {
    return go(state::Greeted{client_name}, auth_undecodable());
  }
  auto first = decoded.find('\0');
  auto second = first == std::string::npos ? std::string::npos
                                           : decoded.find('\0', first + 1);
  if (second == std::string::npos || decoded.find('\0', second + 1) != std::string::npos) {
    return go(state::Greeted{client_name}, auth_undecodable());
  }
  auto authzid = std::string_view(decoded).substr(0, first);
  auto authcid = std::string_view(decoded).substr(first + 1, second - first - 1);
  auto password = std::string_view(decoded).substr(second + 1);
  if ((!authzid.empty() && authzid != authcid) || authcid.empty() ||
      !verify_credentials(credentials, authcid, password)) {
    return go(state::Greeted{client_name}, replies::auth_failed());
  }
  return go(state::Authenticated{client_name, std::string(authcid)},
            replies::auth_succeeded());
}

// A line received while an AUTH exchange is waiting for a response.
std::optional<Transition> auth_response(const SessionState& current,
                                        std::string_view line,
                                        const CredentialStore& credentials) {
  const auto* username = std::get_if<state::AuthAwaitingUsername>(&current);
  const auto* password = std::get_if<state::AuthAwaitingPassword>(&current);
  const auto* plain = std::get_if<state::AuthAwaitingPlain>(&current);
  if (!username && !password && !plain) {
    return std::nullopt;
  }
  const std::string& client = username ? username->client_name
                              : password ? password->client_name
                                         : plain->client_name;
  if (line == "*") {
    return go(state::Greeted{client}, auth_cancelled());
  }
  if (line.size() > max_line_length) {
    return go(state::Greeted{client}, replies::line_too_long());
  }
  if (plain) {
    return finish_plain(client, line, credentials);
  }

  std::string decoded;
  try {
    decoded = decode_base64(line);
  } catch (const ProtocolError&) {
    return go(state::Greeted{client}, auth_undecodable());
  }
  if (username) {
    return go(state::AuthAwaitingPassword{client, std::move(decoded)},
              replies::auth_password_prompt());
  }
  if (!verify_credentials(credentials, password->username, decoded)) {
    return go(state::Greeted{client}, replies::auth_failed());
  }
  return go(state::Authenticated{client, password->username},
            replies::auth_succeeded());
}

Transition data_line(const state::ReceivingData& current, std::string_view line,
                     const Policy& policy, const QueueIdSource& next_id) {
  if (line == ".") {
    if (current.oversized) {
      return go(idle_state(current.client_name, current.authenticated),
                replies::message_too_big());
    }
    auto id = next_id();
    auto reply = replies::queued(id);
    return {idle_state(current.client_name, current.authenticated),
            std::move(reply),
            action::EnqueueMessage{std::move(id), current.envelope,
                                   current.authenticated, current.data}};
  }

  auto next = current;
  if (!line.empty() && line.front() == '.') {
    line.remove_prefix(1);
  }
  if (next.oversized || next.data.size() + line.size() + 2 > policy.max_message_size()) {
    next.oversized = true;
    next.data.clear();
  } else {
    next.data.append(line);
    next.data.append("\r\n");
  }
  return {std::move(next), std::nullopt, action::None{}};
}

Transition command_line(const SessionState& current, std::string_view line,
                        const Policy& policy, const CredentialStore& credentials) {
  Command command;
  try {
    command = parse_command(line);
  } catch (const ProtocolError& e) {
    switch (e.kind()) {
    case ProtocolError::Kind::LineTooLong:
      return stay(current, replies::line_too_long());
    case ProtocolError::Kind::MalformedAddress:
      return stay(current, detail::istarts_with(line, "RCPT") ? bad_recipient_syntax()
                                                              : bad_sender_syntax());
    default:
      return stay(current, syntax_error());
    }
  }

  if (const auto* plain = std::get_if<cmd::AuthPlain>(&command)) {
    const auto* greeted = std::get_if<state::Greeted>(&current);
    if (!greeted) {
      return stay(current, replies::bad_sequence());
    }
    if (!plain->blob) {
      return go(state::AuthAwaitingPlain{greeted->client_name}, plain_prompt());
    }
    return finish_plain(greeted->client_name, *plain->blob, credentials);
  }

  return std::visit(CommandStep{current, policy, context_of(current)}, command);
}

} // namespace

std::string_view state_name(const SessionState& s) {
  struct Namer {
    std::string_view operator()(const state::Connected&) const { return "Connected"; }
    std::string_view operator()(const state::Greeted&) const { return "Greeted"; }
    std::string_view operator()(const state::AuthAwaitingUsername&) const { return "AuthAwaitingUsername"; }
    std::string_view operator()(const state::AuthAwaitingPassword&) const { return "AuthAwaitingPassword"; }
    std::string_view operator()(const state::AuthAwaitingPlain&) const { return "AuthAwaitingPlain"; }
    std::string_view operator()(const state::Authenticated&) const { return "Authenticated"; }
    std::string_view operator()(const state::EnvelopeOpen&) const { return "EnvelopeOpen"; }
    std::string_view operator()(const state::ReceivingData&) const { return "ReceivingData"; }
    std::string_view operator()(const state::Closed&) const { return "Closed"; }
  };
  return std::visit(Namer{}, s);
}

Reply greet(const Policy& policy) {
  return {220, std::nullopt, policy.server_hostname() + " " + policy.banner_tag()};
}

Transition step(const SessionState& current, std::string_view line,
                const Policy& policy, const CredentialStore& credentials,
                const QueueIdSource& next_id) {
  if (std::holds_alternative<state::Closed>(current)) {
    return stay(current, replies::bad_sequence());
  }
  if (const auto* data = std::get_if<state::ReceivingData>(&current)) {
    return data_line(*data, line, policy, next_id);
  }
  if (auto t = auth_response(current, line, credentials)) {
    return std::move(*t);
  }
  return command_line(current, line, policy, credentials);
}

Transition step(const SessionState& current, const Command& command,
                const Policy& policy, const CredentialStore& credentials,
                const QueueIdSource& next_id) {
  return step(current, serialize(command), policy, credentials, next_id);
}

std::vector<Reply> replay_transcript(const std::vector<std::string>& lines,
                                     const Policy& policy,
                                     const CredentialStore& credentials,
                                     const QueueIdSource& next_id) {
  std::vector<Reply> out{greet(policy)};
  SessionState current = state::Connected{};
  for (const auto& line : lines) {
    auto t = step(current, line, policy, credentials, next_id);
    if (t.reply) {
      out.push_back(std::move(*t.reply));
    }
    current = std::move(t.next_state);
  }
  return out;
}

} // namespace smtpguard
