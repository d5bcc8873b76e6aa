#include "cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smtpguard/audit.hpp"
#include "smtpguard/cost_model.hpp"
#include "smtpguard/credentials.hpp"
#include "smtpguard/error.hpp"
#include "smtpguard/server.hpp"
#include "smtpguard/threat_model.hpp"

namespace smtpguard::cli {

namespace {

constexpr int exit_ok = 0;
constexpr int exit_verdict = 1;
constexpr int exit_usage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Global {
  bool json = false;
  bool verbose = false;
};

struct ServeArgs {
  std::string mode;
  std::uint16_t port = 2525;
  std::string users;
  std::string spool;
  std::string hostname;
  std::optional<std::string> banner;
  int timeout = 30;
  std::string bind = "127.0.0.1";
  std::optional<std::uint64_t> seed;
  std::size_t max_connections = 64;
};

struct AdduserArgs {
  std::string users;
  std::string name;
};

struct AuditArgs {
  std::vector<std::string> hosts;
  std::uint16_t port = 25;
  std::string from;
  std::string to;
  std::string ehlo = "www.test.com";
  int timeout = 10;
  std::string category = "Mail servers";
  bool send = false;
  bool acknowledged = false;
  std::optional<std::string> json_path;
  bool no_anonymize = false;
};

struct CostArgs {
  std::string employees;
  std::string workdays;
  std::string wage;
  std::string spam_per_day;
  std::string seconds_per_spam;
  std::string hours_per_day = "8";
  std::string locale = "en";
};

struct DreadArgs {
  std::optional<int> damage;
  std::optional<int> reproducibility;
  std::optional<int> exploitability;
  std::optional<int> affected;
  std::optional<int> discoverability;
  std::optional<std::string> threats;
  bool catalogue = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------

int do_serve(const ServeArgs& a, const Global& g, Io& io) {
  const auto mode = a.mode == "open" ? PolicyMode::Open : PolicyMode::AuthRequired;
  if (mode == PolicyMode::AuthRequired && a.users.empty()) {
    throw UsageError("--mode auth requires --users FILE");
  }
  if (a.timeout <= 0) {
    throw UsageError("--timeout must be positive");
  }

  Policy policy(mode, a.hostname);
  policy.set_command_timeout(std::chrono::seconds(a.timeout));
  if (a.banner) {
    policy.set_banner_tag(*a.banner);
  }
  auto credentials = a.users.empty() ? CredentialStore{} : CredentialStore::load(a.users);

  ServerOptions options;
  options.bind_address = a.bind;
  options.port = a.port;
  options.seed = a.seed;
  options.max_connections = a.max_connections;
  auto& out = io.out;
  const bool json = g.json;
  const bool verbose = g.verbose;
  options.log = [&out, json, verbose](std::string_view text) {
    if (!verbose && text.rfind("listening", 0) != 0) {
      return;
    }
    static std::mutex log_mutex;
    std::lock_guard guard(log_mutex);
    if (json) {
      out << nlohmann::json{{"log", text}}.dump() << std::endl;
    } else {
      out << text << std::endl;
    }
  };

  static const std::atomic<bool> never{false};
  serve(policy, credentials, a.spool, options, io.stop ? *io.stop : never);
  return exit_ok;
}

int do_adduser(const AdduserArgs& a, const Global& g, Io& io) {
  if (a.name.empty() || a.name.find(':') != std::string::npos) {
    throw UsageError("--name must be non-empty and must not contain ':'");
  }
  if (!io.password) {
    throw std::runtime_error("no password source available");
  }
  auto password = io.password("Password for " + a.name + ": ");
  if (!password || password->empty()) {
    throw std::runtime_error("no password given");
  }
  auto store = CredentialStore::load(a.users);
  const bool replaced = store.contains(a.name);
  store.set_password(a.name, *password);
  store.save(a.users);
  if (g.json) {
    io.out << nlohmann::json{{"user", a.name}, {"users_file", a.users},
                             {"replaced", replaced}}
                  .dump()
           << '\n';
  } else {
    io.out << (replaced ? "updated " : "added ") << a.name << " in " << a.users << '\n';
  }
  return exit_ok;
}

int do_audit(const AuditArgs& a, const Global& g, Io& io) {
  if (a.send && !a.acknowledged) {
    throw UsageError("--send requires --i-understand-this-sends-mail");
  }
  if (a.timeout <= 0) {
    throw UsageError("--timeout must be positive");
  }
  Address from = Address::parse(a.from);
  Address to = Address::parse(a.to);

  std::vector<audit::AuditRow> rows;
  std::vector<audit::ProbeResult> results;
  for (const auto& host : a.hosts) {
    audit::ProbeSpec spec(host, from, to);
    spec.port = a.port;
    spec.ehlo_name = a.ehlo;
    spec.timeout = std::chrono::seconds(a.timeout);
    spec.send_message = a.send;
    auto result = audit::probe(spec);
    if (g.verbose) {
      for (const auto& entry : result.transcript) {
        io.err << direction_tag(entry.direction) << ": " << entry.line << '\n';
      }
    }
    results.push_back(result);
    rows.push_back({a.category, host, std::move(result)});
  }

  const bool anonymize = !a.no_anonymize;
  if (a.json_path) {
    std::ofstream file(*a.json_path, std::ios::binary | std::ios::trunc);
    file << audit::render_json(rows, anonymize).dump(2) << '\n';
    if (!file) {
      throw std::runtime_error("cannot write " + *a.json_path);
    }
  }
  if (g.json) {
    io.out << audit::render_json(rows, anonymize).dump(2) << '\n';
  } else {
    io.out << audit::render_table(rows);
    for (const auto& row : rows) {
      io.out << audit::anonymize_host(row.host) << ": verdict "
             << audit::to_string(row.result.verdict) << '\n';
    }
  }
  return audit::exit_code(results);
}

int do_cost(const CostArgs& a, const Global& g, Io& io) {
  cost::CostInputs in;
  in.employees = cost::parse_decimal(a.employees);
  in.workdays_per_year = cost::parse_decimal(a.workdays);
  in.hourly_wage = cost::parse_decimal(a.wage);
  in.spam_per_day_per_employee = cost::parse_decimal(a.spam_per_day);
  in.seconds_per_spam = cost::parse_decimal(a.seconds_per_spam);
  in.hours_per_workday = cost::parse_decimal(a.hours_per_day);
  const auto locale = cost::parse_locale(a.locale);
  const auto report = cost::compute(in);
  if (g.json) {
    io.out << cost::cost_to_json(in, report, locale).dump(2) << '\n';
  } else {
    io.out << cost::render_cost_table(report, locale);
  }
  return exit_ok;
}

int do_dread(const DreadArgs& a, const Global& g, Io& io) {
  const bool single = a.damage || a.reproducibility || a.exploitability || a.affected ||
                      a.discoverability;
  const int sources = (single ? 1 : 0) + (a.threats ? 1 : 0) + (a.catalogue ? 1 : 0);
  if (sources != 1) {
    throw UsageError("give either the five ratings, --threats FILE or --catalogue");
  }

  if (single) {
    if (!(a.damage && a.reproducibility && a.exploitability && a.affected &&
          a.discoverability)) {
      throw UsageError("all five ratings are required");
    }
    threat::DreadScore score(*a.damage, *a.reproducibility, *a.exploitability,
                             *a.affected, *a.discoverability);
    const auto r = threat::risk(score);
    if (g.json) {
      io.out << nlohmann::json{{"damage_potential", score.damage_potential()},
                               {"reproducibility", score.reproducibility()},
                               {"exploitability", score.exploitability()},
                               {"affected_users", score.affected_users()},
                               {"discoverability", score.discoverability()},
                               {"risk", threat::format_risk(r)},
                               {"risk_exact", std::to_string(r.numerator()) + "/" +
                                                  std::to_string(r.denominator())}}
                    .dump(2)
             << '\n';
    } else {
      io.out << threat::format_risk(r) << '\n';
    }
    return exit_ok;
  }

  auto threats = a.catalogue
                     ? threat::mail_threat_catalogue()
                     : threat::threats_from_json(nlohmann::json::parse(read_file(*a.threats)));
  auto ranked = threat::rank(std::move(threats));
  if (g.json) {
    io.out << threat::to_json(ranked).dump(2) << '\n';
    return exit_ok;
  }
  std::size_t width = 6;
  for (const auto& t : ranked) {
    width = std::max(width, t.name.size());
  }
  for (const auto& t : ranked) {
    std::string cats;
    for (auto c : t.categories) {
      cats += (cats.empty() ? "" : ", ") + std::string(threat::name(c));
    }
    io.out << std::left << std::setw(static_cast<int>(width)) << t.name << "  "
           << std::right << std::setw(4) << threat::format_risk(threat::risk(t.score))
           << "  " << cats << '\n';
  }
  return exit_ok;
}

} // namespace

int run(const std::vector<std::string>& args, Io io) {
  CLI::App app{"SMTP spoofing lab: server, audit probe, cost and risk calculators",
               "smtpguard"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Global g;
  app.add_flag("--json", g.json, "Machine-readable JSON output");
  app.add_flag("-v,--verbose", g.verbose, "More output");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the SMTP server until interrupted");
  serve_cmd->add_option("--mode", serve_args.mode, "open or auth")
      ->required()
      ->check(CLI::IsMember({"open", "auth"}));
  serve_cmd->add_option("--port", serve_args.port, "TCP port (0 = ephemeral)")
      ->capture_default_str();
  serve_cmd->add_option("--users", serve_args.users, "Credentials file (auth mode)");
  serve_cmd->add_option("--spool", serve_args.spool, "Spool directory")->required();
  serve_cmd->add_option("--hostname", serve_args.hostname, "Server hostname")->required();
  serve_cmd->add_option("--banner", serve_args.banner, "Banner tag after ESMTP");
  serve_cmd->add_option("--timeout", serve_args.timeout, "Per-command timeout, seconds")
      ->capture_default_str();
  serve_cmd->add_option("--bind", serve_args.bind, "Bind address")->capture_default_str();
  serve_cmd->add_option("--seed", serve_args.seed, "Seed for deterministic queue ids");
  serve_cmd->add_option("--max-connections", serve_args.max_connections)
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  AdduserArgs adduser_args;
  auto* adduser_cmd =
      app.add_subcommand("adduser", "Add or replace a user; the password is prompted");
  adduser_cmd->add_option("--users", adduser_args.users, "Credentials file")->required();
  adduser_cmd->add_option("--name", adduser_args.name, "Username")->required();

  AuditArgs audit_args;
  auto* audit_cmd = app.add_subcommand("audit", "Probe servers for unauthenticated MAIL");
  audit_cmd->add_option("--host", audit_args.hosts, "Target host (repeatable)")->required();
  audit_cmd->add_option("--port", audit_args.port)->capture_default_str();
  audit_cmd->add_option("--from", audit_args.from, "Spoofed sender address")->required();
  audit_cmd->add_option("--to", audit_args.to, "Recipient address")->required();
  audit_cmd->add_option("--ehlo", audit_args.ehlo)->capture_default_str();
  audit_cmd->add_option("--timeout", audit_args.timeout, "Seconds")->capture_default_str();
  audit_cmd->add_option("--category", audit_args.category, "Report category")
      ->capture_default_str();
  audit_cmd->add_flag("--send", audit_args.send, "Complete DATA with a labeled test body");
  audit_cmd->add_flag("--i-understand-this-sends-mail", audit_args.acknowledged);
  audit_cmd->add_option("--json", audit_args.json_path, "Write the full report to PATH");
  audit_cmd->add_flag("--no-anonymize", audit_args.no_anonymize,
                      "Keep raw hostnames in the JSON report");

  CostArgs cost_args;
  auto* cost_cmd = app.add_subcommand("cost", "Yearly cost of reading spam");
  cost_cmd->add_option("--employees", cost_args.employees)->required();
  cost_cmd->add_option("--workdays", cost_args.workdays, "Workdays per year")->required();
  cost_cmd->add_option("--wage", cost_args.wage, "Hourly wage, EUR")->required();
  cost_cmd->add_option("--spam-per-day", cost_args.spam_per_day, "Per employee")->required();
  cost_cmd->add_option("--seconds-per-spam", cost_args.seconds_per_spam)->required();
  cost_cmd->add_option("--hours-per-day", cost_args.hours_per_day)->capture_default_str();
  cost_cmd->add_option("--locale", cost_args.locale)
      ->capture_default_str()
      ->check(CLI::IsMember({"en", "eu"}));

  DreadArgs dread_args;
  auto* dread_cmd = app.add_subcommand("dread", "DREAD risk of one threat, or a ranking");
  auto rating = CLI::Range(1, 10);
  dread_cmd->add_option("--damage", dread_args.damage)->check(rating);
  dread_cmd->add_option("--reproducibility", dread_args.reproducibility)->check(rating);
  dread_cmd->add_option("--exploitability", dread_args.exploitability)->check(rating);
  dread_cmd->add_option("--affected", dread_args.affected)->check(rating);
  dread_cmd->add_option("--discoverability", dread_args.discoverability)->check(rating);
  dread_cmd->add_option("--threats", dread_args.threats, "JSON list of threats to rank");
  dread_cmd->add_flag("--catalogue", dread_args.catalogue, "Rank the built-in mail threats");

  std::vector<std::string> argv_store{"smtpguard"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) {
    argv.push_back(s.c_str());
  }

  auto usage = [&](const std::string& message) {
    io.err << "error: " << message << "\n\n" << app.help();
    return exit_usage;
  };

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    io.out << (app.get_subcommands().empty() ? app.help()
                                             : app.get_subcommands().front()->help());
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    return usage(e.what());
  }

  try {
    if (serve_cmd->parsed()) return do_serve(serve_args, g, io);
    if (adduser_cmd->parsed()) return do_adduser(adduser_args, g, io);
    if (audit_cmd->parsed()) return do_audit(audit_args, g, io);
    if (cost_cmd->parsed()) return do_cost(cost_args, g, io);
    return do_dread(dread_args, g, io);
  } catch (const UsageError& e) {
    return usage(e.what());
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return exit_usage;
  }
}

} // namespace smtpguard::cli
