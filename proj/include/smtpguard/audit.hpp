#pragma once

// Client-side spoofing probe: replays the unauthenticated sender-forging
// dialogue against a server and classifies the outcome.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "smtpguard/channel.hpp"
#include "smtpguard/protocol.hpp"
#include "smtpguard/transcript.hpp"

namespace smtpguard::audit {

struct ProbeSpec {
  ProbeSpec(std::string host, Address spoofed_from, Address rcpt_to)
      : host(std::move(host)), spoofed_from(std::move(spoofed_from)),
        rcpt_to(std::move(rcpt_to)) {}

  std::string host;
  std::uint16_t port = 25;
  std::string ehlo_name = "www.test.com";
  Address spoofed_from;
  Address rcpt_to;
  bool send_message = false; // false: the probe never issues DATA
  std::chrono::seconds timeout{10};
};

enum class Verdict { Vulnerable, Secured, Indeterminate };

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view text);

struct ProbeResult {
  std::string target; // host:port
  Verdict verdict = Verdict::Indeterminate;
  Transcript transcript;
  std::optional<Reply> decisive_reply; // the reply to the unauthenticated MAIL
  std::chrono::system_clock::time_point probed_at;

  bool operator==(const ProbeResult&) const = default;
};

/// Connects over TCP and runs the dialogue. Never throws for network or
/// protocol failures; those yield Indeterminate with a note in the
/// transcript.
ProbeResult probe(const ProbeSpec& spec);

/// Runs the dialogue over an already connected channel.
ProbeResult probe_over(LineChannel& channel, const ProbeSpec& spec);

/// 250 -> Vulnerable, 5xx -> Secured, anything else (4xx, no reply,
/// disconnect) -> Indeterminate.
Verdict classify(const Reply& mail_reply);

/// Locates the reply to the first MAIL command in `transcript` and
/// classifies it. A transcript without one is Indeterminate.
Verdict classify(const Transcript& transcript);

/// Keeps the first label and replaces the others positionally with
/// xx, yy, zz, aa, bb, ... ("mail.example.ac.gr" -> "mail.xx.yy.zz").
std::string anonymize_host(std::string_view fqdn);

/// The self-identifying body sent only when send_message is set.
std::string test_message_body(const ProbeSpec& spec);

struct AuditRow {
  std::string category;
  std::string host;
  ProbeResult result;

  bool operator==(const AuditRow&) const = default;
};


/// Table grouped by category in first-appearance order with columns
/// Mail servers | Vulnerable | Secured. Hostnames are always masked.
std::string render_table(const std::vector<AuditRow>& rows);

/// Full report including transcripts. With `anonymize`, hostnames in the
/// host, target and transcript fields are masked as well.
nlohmann::json render_json(const std::vector<AuditRow>& rows, bool anonymize);

/// Inverse of render_json for the fields it carries.
std::vector<AuditRow> rows_from_json(const nlohmann::json& report);

/// 0 when every result is Secured, 1 if any is Vulnerable, otherwise 2 if
/// any is Indeterminate.
int exit_code(const std::vector<ProbeResult>& results);

} // namespace smtpguard::audit
