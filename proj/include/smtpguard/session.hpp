#pragma once

// Server-side SMTP automaton. `step` is a pure function of its arguments:
// the only source of variation, queue-id generation, is injected.

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smtpguard/credentials.hpp"
#include "smtpguard/protocol.hpp"
#include "smtpguard/queue_id.hpp"

namespace smtpguard {

enum class PolicyMode { Open, AuthRequired };

std::string_view to_string(PolicyMode mode);

/// Open replays the unauthenticated dialogue where any client may claim any
/// sender. AuthRequired refuses MAIL until AUTH has succeeded.
class Policy {
public:
  static constexpr std::size_t default_max_message_size = 8192000;

  /// Throws InvalidArgument for an empty hostname.
  Policy(PolicyMode mode, std::string server_hostname);

  static std::vector<std::string> default_extensions();

  PolicyMode mode() const noexcept { return mode_; }
  const std::string& server_hostname() const noexcept { return hostname_; }
  const std::string& banner_tag() const noexcept { return banner_tag_; }
  const std::vector<std::string>& advertised_extensions() const noexcept {
    return extensions_;
  }
  std::chrono::seconds command_timeout() const noexcept { return timeout_; }
  std::size_t max_message_size() const noexcept { return max_size_; }

  Policy& set_banner_tag(std::string tag);
  /// Throws InvalidArgument unless timeout > 0.
  Policy& set_command_timeout(std::chrono::seconds timeout);
  /// Also rewrites the advertised "SIZE n" keyword. Throws for 0.
  Policy& set_max_message_size(std::size_t bytes);
  /// Throws InvalidArgument if AuthRequired and "AUTH LOGIN PLAIN" is
  /// missing, or if a SIZE keyword disagrees with max_message_size.
  Policy& set_advertised_extensions(std::vector<std::string> extensions);

private:
  void check_invariants(const std::vector<std::string>& extensions) const;

  PolicyMode mode_;
  std::string hostname_;
  std::string banner_tag_ = "M.T.A.";
  std::vector<std::string> extensions_;
  std::chrono::seconds timeout_{30};
  std::size_t max_size_ = default_max_message_size;
};

struct Envelope {
  Address reverse_path;
  std::vector<Address> forward_paths;
  bool operator==(const Envelope&) const = default;
};

namespace state {
struct Connected {
  bool operator==(const Connected&) const = default;
};
struct Greeted {
  std::string client_name;
  bool operator==(const Greeted&) const = default;
};
struct AuthAwaitingUsername {
  std::string client_name;
  bool operator==(const AuthAwaitingUsername&) const = default;
};
struct AuthAwaitingPassword {
  std::string client_name;
  std::string username;
  bool operator==(const AuthAwaitingPassword&) const = default;
};
// AUTH PLAIN sent without an initial response.
struct AuthAwaitingPlain {
  std::string client_name;
  bool operator==(const AuthAwaitingPlain&) const = default;
};
struct Authenticated {
  std::string client_name;
  std::string username;
  bool operator==(const Authenticated&) const = default;
};
struct EnvelopeOpen {
  std::string client_name;
  std::optional<std::string> authenticated;
  Address reverse_path;
  std::vector<Address> forward_paths;
  bool operator==(const EnvelopeOpen&) const = default;
};
struct ReceivingData {
  std::string client_name;
  std::optional<std::string> authenticated;
  Envelope envelope;
  std::string data;       // dot-unstuffed, CRLF line endings
  bool oversized = false; // data stopped accumulating past the size limit
  bool operator==(const ReceivingData&) const = default;
};
struct Closed {
  bool operator==(const Closed&) const = default;
};
} // namespace state

using SessionState =
    std::variant<state::Connected, state::Greeted, state::AuthAwaitingUsername,
                 state::AuthAwaitingPassword, state::AuthAwaitingPlain,
                 state::Authenticated, state::EnvelopeOpen, state::ReceivingData,
                 state::Closed>;

std::string_view state_name(const SessionState& state);

namespace action {
struct None {
  bool operator==(const None&) const = default;
};
struct EnqueueMessage {
  QueueId queue_id;
  Envelope envelope;
  std::optional<std::string> authenticated_as;
  std::string raw_data;
  bool operator==(const EnqueueMessage&) const = default;
};
struct CloseConnection {
  bool operator==(const CloseConnection&) const = default;
};
} // namespace action

using Action =
    std::variant<action::None, action::EnqueueMessage, action::CloseConnection>;

struct Transition {
  SessionState next_state;
  std::optional<Reply> reply; // absent while DATA lines are being collected
  Action action;

  bool operator==(const Transition&) const = default;
};

using QueueIdSource = std::function<QueueId()>;

/// "220 <hostname> <banner_tag>"
Reply greet(const Policy& policy);

/// Advances the session by one input line (no CRLF). Depending on the state
/// the line is a command, a Base64 AUTH response, or a DATA line. Protocol
/// errors become replies; this never throws for client input.
Transition step(const SessionState& current, std::string_view line,
                const Policy& policy, const CredentialStore& credentials,
                const QueueIdSource& next_id);

Transition step(const SessionState& current, const Command& command,
                const Policy& policy, const CredentialStore& credentials,
                const QueueIdSource& next_id);

/// Greets, then folds `step` over `lines`. Inputs that produce no reply
/// (DATA lines) contribute nothing to the result.
std::vector<Reply> replay_transcript(const std::vector<std::string>& lines,
                                     const Policy& policy,
                                     const CredentialStore& credentials,
                                     const QueueIdSource& next_id);

namespace replies {
Reply ok();
Reply address_ok();
Reply start_data();
Reply queued(const QueueId& id);
Reply bye();
Reply bad_sequence();
Reply not_recognized();
Reply not_logged_in(const Address& sender);
Reply auth_username_prompt();
Reply auth_password_prompt();
Reply auth_succeeded();
Reply auth_failed();
Reply tls_not_available();
Reply timeout();
Reply too_many_connections();
Reply local_error();
Reply line_too_long();
Reply message_too_big();
} // namespace replies

} // namespace smtpguard
