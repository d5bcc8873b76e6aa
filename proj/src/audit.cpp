#include "smtpguard/audit.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smtpguard/message.hpp"
#include "smtpguard/spool.hpp"
#include "text_util.hpp"

namespace smtpguard::audit {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  switch (v) {
  case Verdict::Vulnerable:
    return "Vulnerable";
  case Verdict::Secured:
    return "Secured";
  case Verdict::Indeterminate:
    break;
  }
  return "Indeterminate";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "Vulnerable") return Verdict::Vulnerable;
  if (text == "Secured") return Verdict::Secured;
  if (text == "Indeterminate") return Verdict::Indeterminate;
  throw InvalidArgument("unknown verdict: " + std::string(text));
}

Verdict classify(const Reply& mail_reply) {
  if (mail_reply.code() == 250) {
    return Verdict::Vulnerable;
  }
  if (mail_reply.code_class() == 5) {
    return Verdict::Secured;
  }
  return Verdict::Indeterminate;
}

Verdict classify(const Transcript& transcript) {
  auto mail = std::find_if(transcript.begin(), transcript.end(), [](const auto& e) {
    return e.direction == Direction::Client && detail::istarts_with(e.line, "MAIL FROM");
  });
  if (mail == transcript.end()) {
    return Verdict::Indeterminate;
  }
  std::vector<std::string> lines;
  for (auto it = std::next(mail); it != transcript.end(); ++it) {
    if (it->direction == Direction::Client) {
      break;
    }
    if (it->direction != Direction::Server) {
      continue;
    }
    lines.push_back(it->line);
    auto head = peek_reply_line(it->line);
    if (!head || head->last) {
      break;
    }
  }
  try {
    return classify(parse_reply(std::span<const std::string>(lines)));
  } catch (const ProtocolError&) {
    return Verdict::Indeterminate;
  } catch (const InvalidArgument&) {
    return Verdict::Indeterminate;
  }
}

std::string anonymize_host(std::string_view fqdn) {
  auto dot = fqdn.find('.');
  std::string out(fqdn.substr(0, dot));
  std::size_t index = 0;
  while (dot != std::string_view::npos) {
    auto next = fqdn.find('.', dot + 1);
    // x, y, z, then wrap to a, b, c, ...
    const char letter = static_cast<char>('a' + ('x' - 'a' + index) % 26);
    out += '.';
    out += letter;
    out += letter;
    ++index;
    dot = next;
  }
  return out;
}

std::string test_message_body(const ProbeSpec& spec) {
  MailMessage message{
      {
          {"From", "<" + spec.spoofed_from.str() + ">"},
          {"To", "<" + spec.rcpt_to.str() + ">"},
          {"Subject", "[SPOOFING AUDIT TEST] unauthenticated sender probe"},
          {"X-Spoofing-Audit", "test message, not sent by the stated sender"},
      },
      "This is an automated security test.\n"
      "It was sent without authentication while claiming the sender address\n"
      "above, to check whether this mail server accepts forged senders.\n"
      "It was not written by the person named in the From header.\n",
  };
  return message.to_wire();
}

namespace {

class Dialogue {
public:
  Dialogue(LineChannel& channel, const ProbeSpec& spec, ProbeResult& result)
      : channel_(channel), result_(result),
        timeout_(std::chrono::duration_cast<std::chrono::milliseconds>(spec.timeout)) {}

  bool send(const std::string& line) {
    result_.transcript.push_back({Direction::Client, line});
    if (!channel_.write_line(line)) {
      note("write failed");
      return false;
    }
    return true;
  }

  std::optional<Reply> expect() {
    auto read = read_reply(channel_, timeout_);
    for (const auto& line : read.lines) {
      result_.transcript.push_back({Direction::Server, line});
    }
    if (read.status == LineChannel::Status::Timeout) {
      note("timed out waiting for reply");
    } else if (read.status == LineChannel::Status::Closed) {
      note("connection closed by server");
    } else if (!read.reply) {
      note("malformed reply");
    }
    return read.reply;
  }

  void note(std::string text) {
    result_.transcript.push_back({Direction::Note, std::move(text)});
  }

private:
  LineChannel& channel_;
  ProbeResult& result_;
  std::chrono::milliseconds timeout_;
};

void run_dialogue(Dialogue& d, const ProbeSpec& spec, ProbeResult& result) {
  auto greeting = d.expect();
  if (!greeting || greeting->code() != 220) {
    d.note("no usable greeting");
    if (greeting) {
      d.send("QUIT");
      d.expect();
    }
    return;
  }

  if (!d.send("EHLO " + spec.ehlo_name)) return;
  auto hello = d.expect();
  if (hello && hello->code_class() == 5) {
    if (!d.send("HELO " + spec.ehlo_name)) return;
    hello = d.expect();
  }
  if (!hello || hello->code() != 250) {
    d.note("greeting exchange failed");
    if (hello) {
      d.send("QUIT");
      d.expect();
    }
    return;
  }

  if (!d.send("MAIL FROM:<" + spec.spoofed_from.str() + ">")) return;
  result.decisive_reply = d.expect();
  if (!result.decisive_reply) {
    return;
  }
  if (result.decisive_reply->code() != 250) {
    if (d.send("RSET") && d.expect()) {
      d.send("QUIT");
      d.expect();
    }
    return;
  }

  if (!d.send("RCPT TO:<" + spec.rcpt_to.str() + ">")) return;
  auto rcpt = d.expect();
  if (!rcpt) {
    return;
  }

  if (spec.send_message && rcpt->code() == 250) {
    if (!d.send("DATA")) return;
    auto go_ahead = d.expect();
    if (go_ahead && go_ahead->code() == 354) {
      const auto body = dot_stuff(test_message_body(spec));
      std::string_view rest = body;
      while (!rest.empty()) {
        const auto crlf = rest.find("\r\n");
        if (!d.send(std::string(rest.substr(0, crlf)))) return;
        rest.remove_prefix(crlf == std::string_view::npos ? rest.size() : crlf + 2);
      }
      if (!d.send(".")) return;
      if (!d.expect()) return;
    }
  } else {
    if (!d.send("RSET")) return;
    if (!d.expect()) return;
  }
  d.send("QUIT");
  d.expect();
}

} // namespace

ProbeResult probe_over(LineChannel& channel, const ProbeSpec& spec) {
  ProbeResult result;
  result.target = spec.host + ":" + std::to_string(spec.port);
  result.probed_at = std::chrono::system_clock::now();
  Dialogue dialogue(channel, spec, result);
  run_dialogue(dialogue, spec, result);
  result.verdict = classify(result.transcript);
  return result;
}

ProbeResult probe(const ProbeSpec& spec) {
  std::unique_ptr<TcpChannel> channel;
  try {
    channel = TcpChannel::connect(
        spec.host, spec.port,
        std::chrono::duration_cast<std::chrono::milliseconds>(spec.timeout));
  } catch (const std::exception& e) {
    ProbeResult result;
    result.target = spec.host + ":" + std::to_string(spec.port);
    result.probed_at = std::chrono::system_clock::now();
    result.transcript.push_back({Direction::Note, e.what()});
    result.verdict = Verdict::Indeterminate;
    return result;
  }
  auto result = probe_over(*channel, spec);
  channel->close();
  return result;
}

// ---------------------------------------------------------------------------
// Reporting

namespace {

struct Cells {
  std::string vulnerable;
  std::string secured;
};

Cells cells_for(Verdict v) {
  switch (v) {
  case Verdict::Vulnerable:
    return {"Yes", "No"};
  case Verdict::Secured:
    return {"No", "Yes"};
  case Verdict::Indeterminate:
    break;
  }
  return {"?", "?"};
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  if (from.empty()) {
    return text;
  }
  for (auto pos = text.find(from); pos != std::string::npos;
       pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
  return text;
}

json reply_to_json(const std::optional<Reply>& reply) {
  if (!reply) {
    return nullptr;
  }
  return {{"code", reply->code()},
          {"enhanced", reply->enhanced() ? json(reply->enhanced()->str()) : json(nullptr)},
          {"lines", reply->lines()}};
}

std::optional<Reply> reply_from_json(const json& j) {
  if (j.is_null()) {
    return std::nullopt;
  }
  std::optional<EnhancedStatus> enhanced;
  if (!j.at("enhanced").is_null()) {
    enhanced = EnhancedStatus::parse(j.at("enhanced").get<std::string>());
  }
  return Reply(j.at("code").get<int>(), enhanced,
               j.at("lines").get<std::vector<std::string>>());
}

} // namespace

std::string render_table(const std::vector<AuditRow>& rows) {
  std::vector<std::string> categories;
  for (const auto& row : rows) {
    if (std::find(categories.begin(), categories.end(), row.category) == categories.end()) {
      categories.push_back(row.category);
    }
  }

  std::size_t cat_width = std::string_view("Category").size();
  std::size_t host_width = std::string_view("Mail servers").size();
  for (const auto& row : rows) {
    cat_width = std::max(cat_width, row.category.size());
    host_width = std::max(host_width, anonymize_host(row.host).size());
  }

  std::ostringstream out;
  auto line = [&](std::string_view cat, std::string_view host, std::string_view vuln,
                  std::string_view sec) {
    out << std::left << std::setw(static_cast<int>(cat_width)) << cat << " | "
        << std::setw(static_cast<int>(host_width)) << host << " | " << std::setw(10)
        << vuln << " | " << sec << '\n';
  };
  line("Category", "Mail servers", "Vulnerable", "Secured");
  out << std::string(cat_width, '-') << "-+-" << std::string(host_width, '-')
      << "-+-" << std::string(10, '-') << "-+-" << std::string(7, '-') << '\n';
  for (const auto& category : categories) {
    bool first = true;
    for (const auto& row : rows) {
      if (row.category != category) {
        continue;
      }
      auto cells = cells_for(row.result.verdict);
      line(first ? category : "", anonymize_host(row.host), cells.vulnerable,
           cells.secured);
      first = false;
    }
  }
  return out.str();
}

json render_json(const std::vector<AuditRow>& rows, bool anonymize) {
  auto out = json::array();
  for (const auto& row : rows) {
    const auto masked = anonymize_host(row.host);
    auto scrub = [&](const std::string& text) {
      return anonymize ? replace_all(text, row.host, masked) : text;
    };
    auto transcript = json::array();
    for (const auto& entry : row.result.transcript) {
      transcript.push_back({{"dir", direction_tag(entry.direction)},
                            {"line", scrub(entry.line)}});
    }
    auto cells = cells_for(row.result.verdict);
    out.push_back({
        {"category", row.category},
        {"host", anonymize ? masked : row.host},
        {"masked_host", masked},
        {"target", scrub(row.result.target)},
        {"verdict", to_string(row.result.verdict)},
        {"vulnerable", cells.vulnerable},
        {"secured", cells.secured},
        {"probed_at", format_rfc3339(row.result.probed_at)},
        {"decisive_reply", reply_to_json(row.result.decisive_reply)},
        {"transcript", transcript},
    });
  }
  return {{"anonymized", anonymize}, {"rows", out}};
}

std::vector<AuditRow> rows_from_json(const json& report) {
  std::vector<AuditRow> rows;
  for (const auto& r : report.at("rows")) {
    ProbeResult result;
    result.target = r.at("target").get<std::string>();
    result.verdict = parse_verdict(r.at("verdict").get<std::string>());
    result.probed_at = parse_rfc3339(r.at("probed_at").get<std::string>());
    result.decisive_reply = reply_from_json(r.at("decisive_reply"));
    for (const auto& e : r.at("transcript")) {
      result.transcript.push_back({parse_direction_tag(e.at("dir").get<std::string>()),
                                   e.at("line").get<std::string>()});
    }
    rows.push_back({r.at("category").get<std::string>(), r.at("host").get<std::string>(),
                    std::move(result)});
  }
  return rows;
}

int exit_code(const std::vector<ProbeResult>& results) {
  bool indeterminate = false;
  for (const auto& r : results) {
    if (r.verdict == Verdict::Vulnerable) {
      return 1;
    }
    indeterminate = indeterminate || r.verdict == Verdict::Indeterminate;
  }
  return indeterminate ? 2 : 0;
}

} // namespace smtpguard::audit
