#include "smtpguard/testkit.hpp"

#include <regex>
#include <thread>

#include "smtpguard/message.hpp"
#include "smtpguard/server.hpp"

namespace smtpguard {

std::string_view direction_tag(Direction d) {
  switch (d) {
  case Direction::Client:
    return "C";
  case Direction::Server:
    return "S";
  case Direction::Note:
    break;
  }
  return "#";
}

Direction parse_direction_tag(std::string_view tag) {
  if (tag == "C") return Direction::Client;
  if (tag == "S") return Direction::Server;
  if (tag == "#") return Direction::Note;
  throw InvalidArgument("unknown transcript direction: " + std::string(tag));
}

} // namespace smtpguard

namespace smtpguard::testkit {

// ---------------------------------------------------------------------------
// DuplexPipe

struct DuplexPipe::Shared {
  std::mutex mutex;
  std::condition_variable cv;
  std::string to_server;
  std::string to_client;
  bool client_closed = false;
  bool server_closed = false;
};

class DuplexPipe::Endpoint final : public LineChannel {
public:
  Endpoint(std::shared_ptr<Shared> shared, bool is_client, Clock& clock)
      : shared_(std::move(shared)), is_client_(is_client), clock_(clock) {}

  void close() override {
    std::lock_guard guard(shared_->mutex);
    (is_client_ ? shared_->client_closed : shared_->server_closed) = true;
    shared_->cv.notify_all();
  }

protected:
  RecvStatus receive(std::string& out, Clock::Duration deadline) override {
    std::unique_lock lock(shared_->mutex);
    auto& inbox = is_client_ ? shared_->to_client : shared_->to_server;
    for (;;) {
      if (!inbox.empty()) {
        out += inbox;
        inbox.clear();
        return RecvStatus::Data;
      }
      if (shared_->client_closed || shared_->server_closed) {
        return RecvStatus::Closed;
      }
      if (clock_.now() >= deadline) {
        return RecvStatus::Timeout;
      }
      clock_.wait_until(lock, shared_->cv, deadline);
    }
  }

  bool send(std::string_view bytes) override {
    std::lock_guard guard(shared_->mutex);
    if (shared_->client_closed || shared_->server_closed) {
      return false;
    }
    (is_client_ ? shared_->to_server : shared_->to_client).append(bytes);
    shared_->cv.notify_all();
    return true;
  }

  Clock& clock() override { return clock_; }

private:
  std::shared_ptr<Shared> shared_;
  bool is_client_;
  Clock& clock_;
};

DuplexPipe::DuplexPipe()
    : DuplexPipe(SteadyClock::instance(), SteadyClock::instance()) {}

DuplexPipe::DuplexPipe(Clock& client_clock, Clock& server_clock)
    : shared_(std::make_shared<Shared>()),
      client_(std::make_unique<Endpoint>(shared_, true, client_clock)),
      server_(std::make_unique<Endpoint>(shared_, false, server_clock)) {}

DuplexPipe::~DuplexPipe() = default;

LineChannel& DuplexPipe::client() { return *client_; }
LineChannel& DuplexPipe::server() { return *server_; }

// ---------------------------------------------------------------------------
// Scripts

ScriptedClient& ScriptedClient::send(std::string line) {
  steps_.push_back({ScriptStep::Kind::Send, std::move(line), 0});
  return *this;
}

ScriptedClient& ScriptedClient::expect_code(int code) {
  steps_.push_back({ScriptStep::Kind::ExpectCode, {}, code});
  return *this;
}

ScriptedClient& ScriptedClient::expect_line(std::string pattern) {
  steps_.push_back({ScriptStep::Kind::ExpectLine, std::move(pattern), 0});
  return *this;
}

std::vector<int> ScriptRun::reply_codes() const {
  std::vector<int> codes;
  for (const auto& r : replies) {
    codes.push_back(r.code());
  }
  return codes;
}

namespace {

std::string describe_failure(const ReplyRead& read) {
  switch (read.status) {
  case LineChannel::Status::Timeout:
    return "<timeout>";
  case LineChannel::Status::Closed:
    return "<closed>";
  case LineChannel::Status::TooLong:
    return "<line too long>";
  case LineChannel::Status::Ok:
    break;
  }
  return read.lines.empty() ? "<no reply>" : "<malformed: " + read.lines.back() + ">";
}

// Records the reply lines and returns the parsed reply, if any.
const std::optional<Reply>& record(ScriptRun& run, const ReplyRead& read) {
  for (const auto& line : read.lines) {
    run.transcript.push_back({Direction::Server, line});
  }
  if (read.reply) {
    run.replies.push_back(*read.reply);
  }
  return read.reply;
}

} // namespace

ScriptRun run_script(LineChannel& channel, const ScriptedClient& script,
                     std::chrono::milliseconds io_timeout) {
  ScriptRun run;
  channel.set_capture(true);

  auto greeting = read_reply(channel, io_timeout);
  if (!record(run, greeting)) {
    run.mismatch = StepMismatch{0, "greeting", describe_failure(greeting)};
  }

  const auto& steps = script.steps();
  for (std::size_t i = 0; i < steps.size() && !run.mismatch; ++i) {
    const auto& s = steps[i];
    if (s.kind == ScriptStep::Kind::Send) {
      run.transcript.push_back({Direction::Client, s.text});
      if (!channel.write_line(s.text)) {
        run.mismatch = StepMismatch{i, "send " + s.text, "<closed>"};
      }
      continue;
    }

    auto read = read_reply(channel, io_timeout);
    const auto& reply = record(run, read);
    if (s.kind == ScriptStep::Kind::ExpectCode) {
      if (!reply) {
        run.mismatch = StepMismatch{i, std::to_string(s.code), describe_failure(read)};
      } else if (reply->code() != s.code) {
        run.mismatch = StepMismatch{i, std::to_string(s.code), std::to_string(reply->code())};
      }
    } else {
      const std::regex pattern(s.text);
      bool matched = false;
      for (const auto& line : read.lines) {
        matched = matched || std::regex_search(line, pattern);
      }
      if (!matched) {
        run.mismatch = StepMismatch{
            i, "/" + s.text + "/",
            read.lines.empty() ? describe_failure(read) : read.lines.back()};
      }
    }
  }
  run.received_bytes = channel.captured();
  return run;
}

LoopbackResult loopback_session(const Policy& policy,
                                const CredentialStore& credentials,
                                const ScriptedClient& script,
                                const LoopbackOptions& options) {
  DuplexPipe pipe;
  MemorySpool sink;
  QueueIdGenerator ids(options.seed);
  ConnectionContext ctx{policy, credentials, [&ids] { return ids.next(); }, sink,
                        [&options] { return options.received_at; }, {}};

  std::thread server([&] { run_connection(pipe.server(), ctx); });
  LoopbackResult result;
  static_cast<ScriptRun&>(result) = run_script(pipe.client(), script, options.io_timeout);
  pipe.client().close();
  server.join();
  result.spooled = sink.messages();
  return result;
}

ScriptRun tcp_session(const std::string& host, std::uint16_t port,
                      const ScriptedClient& script,
                      std::chrono::milliseconds io_timeout) {
  auto channel = TcpChannel::connect(host, port, io_timeout);
  auto run = run_script(*channel, script, io_timeout);
  channel->close();
  return run;
}

TimeoutDrillResult timeout_drill(const Policy& policy, std::chrono::seconds idle) {
  constexpr auto real_limit = std::chrono::milliseconds(5000);
  VirtualClock virtual_clock;
  DuplexPipe pipe(SteadyClock::instance(), virtual_clock);
  MemorySpool sink;
  QueueIdGenerator ids(0);
  CredentialStore no_users;
  ConnectionContext ctx{policy, no_users, [&ids] { return ids.next(); }, sink,
                        [] { return std::chrono::system_clock::now(); }, {}};

  std::thread server([&] { run_connection(pipe.server(), ctx); });
  auto& client = pipe.client();
  TimeoutDrillResult result;

  read_reply(client, real_limit); // greeting
  virtual_clock.wait_for_waiters(1, real_limit);
  const auto parked = virtual_clock.waits_started();
  virtual_clock.advance(idle);

  // Either the server answers the clock tick (timeout) or it parks again.
  const auto give_up = std::chrono::steady_clock::now() + real_limit;
  while (std::chrono::steady_clock::now() < give_up) {
    auto read = read_reply(client, std::chrono::milliseconds(20));
    if (read.reply) {
      result.reply = read.reply;
      result.closed = client.read_line(real_limit).status == LineChannel::Status::Closed;
      break;
    }
    if (read.status == LineChannel::Status::Closed) {
      result.closed = true;
      break;
    }
    if (virtual_clock.waits_started() > parked) {
      client.write_line("NOOP");
      auto noop = read_reply(client, real_limit);
      result.reply = noop.reply;
      result.closed = noop.status == LineChannel::Status::Closed;
      client.write_line("QUIT");
      read_reply(client, real_limit);
      break;
    }
  }
  client.close();
  server.join();
  return result;
}

std::vector<std::string> spoofing_dialogue_lines(const MailMessage& message,
                                                 const Address& from,
                                                 const Address& to,
                                                 const std::string& ehlo_name) {
  std::vector<std::string> lines{
      "EHLO " + ehlo_name,
      "MAIL FROM:<" + from.str() + ">",
      "RCPT TO:<" + to.str() + ">",
      "DATA",
  };
  const auto wire = dot_stuff(message.to_wire());
  std::string_view rest = wire;
  while (!rest.empty()) {
    auto crlf = rest.find("\r\n");
    lines.emplace_back(rest.substr(0, crlf));
    if (crlf == std::string_view::npos) {
      break;
    }
    rest.remove_prefix(crlf + 2);
  }
  lines.emplace_back(".");
  lines.emplace_back("QUIT");
  return lines;
}

ScriptedClient spoofing_script(const MailMessage& message, const Address& from,
                               const Address& to, const std::string& ehlo_name) {
  const auto lines = spoofing_dialogue_lines(message, from, to, ehlo_name);
  ScriptedClient script;
  script.send(lines[0]).expect_code(250);
  script.send(lines[1]).expect_code(250);
  script.send(lines[2]).expect_code(250);
  script.send(lines[3]).expect_code(354);
  for (std::size_t i = 4; i + 2 < lines.size(); ++i) {
    script.send(lines[i]);
  }
  script.send(".").expect_code(250);
  script.send("QUIT").expect_code(221);
  return script;
}

MailMessage sample_spoofed_message() {
  return MailMessage{
      {
          {"Date", "Wed, 22 Jul 2009 13:56:45 +0300"},
          {"From", "\"Secretary\" <secr@mail.gr>"},
          {"To", "\"Professors\" <professor@mail.gr>"},
          {"Subject", "Board of Examiners"},
          {"Reply-To", "secr@mail.gr"},
          {"User-Agent", "Webmail/0.2.0"},
          {"Content-Transfer-Encoding", "8bit"},
          {"Content-Type", "text/plain; charset=\"UTF-8\""},
      },
      "You are invited to the Board of Examiners meeting\n"
      "scheduled for Thursday 16 September 2010 at 12.30\n"
      "p.m. at the department's council room.\n",
  };
}

} // namespace smtpguard::testkit
