#pragma once

// Socket-free harness: an in-memory duplex byte pipe with the LineChannel
// contract, scripted SMTP clients and loopback/timeout drills. Shipped with
// the library so the audit tool can check itself against a local oracle.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "smtpguard/channel.hpp"
#include "smtpguard/clock.hpp"
#include "smtpguard/credentials.hpp"
#include "smtpguard/message.hpp"
#include "smtpguard/session.hpp"
#include "smtpguard/spool.hpp"
#include "smtpguard/transcript.hpp"

namespace smtpguard::testkit {

/// Two connected endpoints. Bytes written on one are read on the other, in
/// order, exactly once. Each endpoint measures read deadlines on its own
/// clock, so a server side can run on a VirtualClock while the client side
/// uses real time.
class DuplexPipe {
public:
  DuplexPipe();
  DuplexPipe(Clock& client_clock, Clock& server_clock);
  ~DuplexPipe();
  DuplexPipe(const DuplexPipe&) = delete;
  DuplexPipe& operator=(const DuplexPipe&) = delete;

  LineChannel& client();
  LineChannel& server();

private:
  struct Shared;
  class Endpoint;
  std::shared_ptr<Shared> shared_;
  std::unique_ptr<Endpoint> client_;
  std::unique_ptr<Endpoint> server_;
};

struct ScriptStep {
  enum class Kind { Send, ExpectCode, ExpectLine };
  Kind kind;
  std::string text; // line to send, or regex for ExpectLine
  int code = 0;
};

/// Builder for a lockstep client script. The server greeting is always read
/// (and recorded) before the first step.
class ScriptedClient {
public:
  ScriptedClient& send(std::string line);
  ScriptedClient& expect_code(int code);
  /// Reads one reply and requires some line of it to match `pattern`
  /// (ECMAScript regex, searched).
  ScriptedClient& expect_line(std::string pattern);

  const std::vector<ScriptStep>& steps() const noexcept { return steps_; }
  bool empty() const noexcept { return steps_.empty(); }

private:
  std::vector<ScriptStep> steps_;
};

struct StepMismatch {
  std::size_t index;
  std::string expected;
  std::string got;
};

struct ScriptRun {
  Transcript transcript;
  std::vector<Reply> replies;        // greeting first
  std::optional<StepMismatch> mismatch;
  std::string received_bytes;        // raw server byte stream

  bool passed() const noexcept { return !mismatch; }
  std::vector<int> reply_codes() const;
};

/// Executes `script` over an already connected client channel.
ScriptRun run_script(LineChannel& channel, const ScriptedClient& script,
                     std::chrono::milliseconds io_timeout);

struct LoopbackOptions {
  std::uint64_t seed = 0; // queue-id generator seed
  std::chrono::milliseconds io_timeout{5000};
  std::chrono::system_clock::time_point received_at =
      std::chrono::system_clock::time_point(std::chrono::seconds(1'000'000'000));
};

struct LoopbackResult : ScriptRun {
  std::vector<SpooledMessage> spooled;
};

/// Runs the session automaton against `script` over a DuplexPipe, with the
/// server side on its own thread. Deterministic for a given seed.
LoopbackResult loopback_session(const Policy& policy,
                                const CredentialStore& credentials,
                                const ScriptedClient& script,
                                const LoopbackOptions& options = {});

/// Same script against a real server over TCP.
ScriptRun tcp_session(const std::string& host, std::uint16_t port,
                      const ScriptedClient& script,
                      std::chrono::milliseconds io_timeout = std::chrono::seconds(5));

struct TimeoutDrillResult {
  bool closed = false;         // server closed the connection
  std::optional<Reply> reply;  // what the server said after the idle period
};

/// Greets, idles for `idle` on a virtual clock, then observes the server.
/// Past the policy's command timeout the server answers 421 and closes;
/// otherwise a NOOP still gets 250.
TimeoutDrillResult timeout_drill(const Policy& policy, std::chrono::seconds idle);

/// Client lines of the unauthenticated spoofing dialogue, ready to replay.
std::vector<std::string> spoofing_dialogue_lines(const MailMessage& message,
                                                 const Address& from,
                                                 const Address& to,
                                                 const std::string& ehlo_name);

/// The spoofing dialogue as a script expecting the open-server codes
/// 250 / 250 / 250 / 354 / 250 / 221.
ScriptedClient spoofing_script(const MailMessage& message, const Address& from,
                               const Address& to, const std::string& ehlo_name);

/// Forged board-meeting invitation used as the reference spoofed message.
MailMessage sample_spoofed_message();

} // namespace smtpguard::testkit
