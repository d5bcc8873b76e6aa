#include "properties.hpp"

#include <random>
#include <thread>
#include <vector>

#include "smtpguard/audit.hpp"
#include "smtpguard/base64.hpp"
#include "smtpguard/server.hpp"
#include "smtpguard/session.hpp"
#include "smtpguard/testkit.hpp"

namespace smtpguard::props {

using namespace std::chrono_literals;

WalkStats random_walk_soundness(std::uint64_t seed, int walks, int max_length) {
  const Policy open(PolicyMode::Open, "smtp.mail.gr");
  const Policy auth(PolicyMode::AuthRequired, "smtp.mail.gr");
  CredentialStore creds;
  creds.set_password("secr", "s3cret");
  QueueIdGenerator ids(seed);
  const QueueIdSource next_id = [&ids] { return ids.next(); };

  const std::string user = encode_base64(std::string_view("secr"));
  const std::string pass = encode_base64(std::string_view("s3cret"));
  const std::string plain = encode_base64(std::string_view("\0secr\0s3cret", 12));
  const std::vector<std::string> vocabulary{
      "EHLO www.test.com", "HELO x",        "MAIL FROM:<secr@mail.gr>",
      "RCPT TO:<professor@mail.gr>", "DATA", ".",
      "body text",         "AUTH LOGIN",    user,
      pass,                encode_base64(std::string_view("wrong")), "AUTH PLAIN " + plain,
      "AUTH PLAIN",        plain,           "RSET",
      "NOOP",              "QUIT",          "STARTTLS",
      "MAIL FROM:junk",    "garbage",       "..dotted",
  };

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, vocabulary.size() - 1);
  std::uniform_int_distribution<int> length(1, max_length);

  // Half of the steps follow the happy path for the current state so that
  // walks get deep enough to deliver; the rest are uniform noise. The
  // checker below does not look at how a line was chosen.
  auto guided = [&](const SessionState& s, const Policy& p) -> std::string {
    const bool flip = rng() % 2 == 0;
    return std::visit(
        [&](const auto& st) -> std::string {
          using T = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<T, state::Connected>) return "EHLO www.test.com";
          if constexpr (std::is_same_v<T, state::Greeted>) {
            if (p.mode() == PolicyMode::Open || flip) return "MAIL FROM:<secr@mail.gr>";
            return "AUTH LOGIN";
          }
          if constexpr (std::is_same_v<T, state::AuthAwaitingUsername>) return user;
          if constexpr (std::is_same_v<T, state::AuthAwaitingPassword>) return pass;
          if constexpr (std::is_same_v<T, state::AuthAwaitingPlain>) return plain;
          if constexpr (std::is_same_v<T, state::Authenticated>) {
            return "MAIL FROM:<secr@mail.gr>";
          }
          if constexpr (std::is_same_v<T, state::EnvelopeOpen>) {
            return flip ? "DATA" : "RCPT TO:<professor@mail.gr>";
          }
          if constexpr (std::is_same_v<T, state::ReceivingData>) {
            return flip ? "." : "body text";
          }
          return "QUIT";
        },
        s);
  };

  WalkStats stats;
  auto violate = [&](int walk, const std::string& why) {
    if (stats.violations++ == 0) {
      stats.first_violation = "walk " + std::to_string(walk) + ": " + why;
    }
  };

  for (int walk = 0; walk < walks; ++walk) {
    const Policy& policy = walk % 2 == 0 ? open : auth;
    SessionState s = state::Connected{};
    bool saw_235 = false;
    bool mail_ok = false;
    bool rcpt_ok = false;

    const int n = length(rng);
    for (int i = 0; i < n; ++i) {
      const std::string line = rng() % 2 == 0 ? guided(s, policy) : vocabulary[pick(rng)];
      const bool receiving = std::holds_alternative<state::ReceivingData>(s);
      auto t = step(s, line, policy, creds, next_id);
      ++stats.steps;

      if (auto* e = std::get_if<action::EnqueueMessage>(&t.action)) {
        ++stats.enqueued;
        if (!mail_ok || !rcpt_ok) {
          violate(walk, "enqueue without accepted MAIL and RCPT");
        }
        if (e->envelope.reverse_path.str() != "secr@mail.gr" ||
            e->envelope.forward_paths.empty()) {
          violate(walk, "enqueued envelope differs from the accepted one");
        }
        if (policy.mode() == PolicyMode::AuthRequired &&
            (!saw_235 || e->authenticated_as != std::optional<std::string>("secr"))) {
          violate(walk, "enqueue in AuthRequired mode without a prior 235");
        }
      }

      if (t.reply && !receiving) {
        const int code = t.reply->code();
        saw_235 = saw_235 || code == 235;
        if (line.starts_with("MAIL FROM:<") && code == 250) {
          mail_ok = true;
          rcpt_ok = false;
        } else if (line.starts_with("RCPT") && code == 250) {
          rcpt_ok = true;
        }
      }
      // Back in an idle state: the transaction is over.
      if (!std::holds_alternative<state::EnvelopeOpen>(t.next_state) &&
          !std::holds_alternative<state::ReceivingData>(t.next_state)) {
        mail_ok = false;
        rcpt_ok = false;
      }
      s = std::move(t.next_state);
    }
    ++stats.walks;
  }
  return stats;
}

namespace {

bool has_client_data_line(const Transcript& t) {
  for (const auto& e : t) {
    if (e.direction != Direction::Client || e.line.size() < 4) {
      continue;
    }
    std::string verb = e.line.substr(0, 4);
    for (auto& c : verb) {
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    if (verb == "DATA") {
      return true;
    }
  }
  return false;
}

audit::ProbeResult probe_session(const Policy& policy, const audit::ProbeSpec& spec) {
  testkit::DuplexPipe pipe;
  MemorySpool sink;
  CredentialStore creds;
  QueueIdGenerator ids(1);
  ConnectionContext ctx{policy, creds, [&] { return ids.next(); }, sink,
                        [] { return std::chrono::system_clock::now(); }, {}};
  std::thread server([&] { run_connection(pipe.server(), ctx); });
  auto result = audit::probe_over(pipe.client(), spec);
  pipe.client().close();
  server.join();
  return result;
}

audit::ProbeResult probe_random_server(std::uint64_t seed, const audit::ProbeSpec& spec) {
  static const std::vector<int> codes{220, 221, 235, 250, 251, 334, 354, 421,
                                      450, 500, 502, 503, 530, 550, 553};
  testkit::DuplexPipe pipe;
  std::thread server([&pipe, seed] {
    std::mt19937_64 rng(seed);
    auto code = [&] { return std::to_string(codes[rng() % codes.size()]); };
    auto& s = pipe.server();
    s.write_line(code() + " hello");
    for (;;) {
      auto in = s.read_line(2000ms);
      if (in.status != LineChannel::Status::Ok || rng() % 10 == 0) {
        s.close();
        return;
      }
      if (rng() % 10 == 0) {
        s.write_line("250-multi");
      }
      s.write_line(code() + " reply");
    }
  });
  auto result = audit::probe_over(pipe.client(), spec);
  pipe.client().close();
  server.join();
  return result;
}

} // namespace

DryRunStats dry_run_safety(std::uint64_t seed, int runs) {
  std::mt19937_64 rng(seed);
  DryRunStats stats;
  for (int i = 0; i < runs; ++i) {
    audit::ProbeSpec spec("mx" + std::to_string(i) + ".example.gr",
                          Address::parse("secr@mail.gr"),
                          Address::parse("professor@mail.gr"));
    spec.timeout = std::chrono::seconds(5);
    spec.ehlo_name = rng() % 2 ? "www.test.com" : "probe.local";

    audit::ProbeResult r;
    if (i % 2 == 0) {
      Policy policy(rng() % 2 ? PolicyMode::Open : PolicyMode::AuthRequired, "h");
      r = probe_session(policy, spec);
    } else {
      r = probe_random_server(rng(), spec);
    }

    ++stats.runs;
    switch (r.verdict) {
    case audit::Verdict::Vulnerable: ++stats.vulnerable; break;
    case audit::Verdict::Secured: ++stats.secured; break;
    case audit::Verdict::Indeterminate: ++stats.indeterminate; break;
    }
    if (has_client_data_line(r.transcript)) {
      ++stats.runs_with_data;
    }
  }
  return stats;
}

} // namespace smtpguard::props
