#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "smtpguard/audit.hpp"
#include "smtpguard/cost_model.hpp"
#include "smtpguard/credentials.hpp"
#include "smtpguard/server.hpp"
#include "smtpguard/threat_model.hpp"

using namespace smtpguard;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(const std::vector<std::string>& args, std::optional<std::string> password = {}) {
  std::ostringstream out, err;
  cli::Io io{out, err, [password](std::string_view) { return password; }, nullptr};
  const int code = cli::run(args, io);
  return {code, out.str(), err.str()};
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() /
         ("smtpguard-cli-" + std::to_string(::getpid()) + "-" + name);
}

const std::vector<std::string> cost_args{"cost",  "--employees", "680", "--workdays", "230",
                                         "--wage", "15", "--spam-per-day", "25",
                                         "--seconds-per-spam", "3"};

} // namespace

TEST(Cli, Cost) {
  auto r = invoke(cost_args);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("48,875.00"), std::string::npos);
  EXPECT_NE(r.out.find("212.50"), std::string::npos);
  auto args = cost_args;
  args.insert(args.end(), {"--locale", "eu"});
  EXPECT_NE(invoke(args).out.find("48.875,00"), std::string::npos);
}

TEST(Cli, CostJsonRoundTrip) {
  auto args = cost_args;
  args.insert(args.begin(), "--json");
  auto r = invoke(args);
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(cost::report_from_json(j).annual_cost, cost::Rational(48875));
  // Flag accepted after the subcommand too.
  auto late = cost_args;
  late.push_back("--json");
  EXPECT_EQ(nlohmann::json::parse(invoke(late).out), j);
}

TEST(Cli, Dread) {
  auto r = invoke({"dread", "--damage", "10", "--reproducibility", "10", "--exploitability", "7",
                "--affected", "10", "--discoverability", "10"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "9.4\n");
  r = invoke({"--json", "dread", "--damage", "1", "--reproducibility", "1", "--exploitability",
           "1", "--affected", "1", "--discoverability", "2"});
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("risk"), "1.2");
  EXPECT_EQ(j.at("risk_exact"), "6/5");
}

TEST(Cli, DreadRanking) {
  const auto file = temp_path("threats.json");
  {
    std::ofstream(file) << threat::to_json(threat::mail_threat_catalogue()).dump();
  }
  auto r = invoke({"--json", "dread", "--threats", file.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ranked = threat::threats_from_json(nlohmann::json::parse(r.out));
  EXPECT_EQ(ranked, threat::rank(threat::mail_threat_catalogue()));
  EXPECT_EQ(invoke({"dread", "--catalogue"}).code, 0);
  fs::remove(file);
}

TEST(Cli, UsageErrors) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"bogus"},
           {"cost", "--employees", "680"},
           {"dread", "--damage", "11", "--reproducibility", "1", "--exploitability", "1",
            "--affected", "1", "--discoverability", "1"},
           {"dread", "--damage", "3"},
           {"dread"},
           {"serve", "--mode", "relay", "--spool", "/tmp", "--hostname", "h"},
           {"serve", "--mode", "auth", "--spool", "/tmp", "--hostname", "h"},
           {"audit", "--host", "127.0.0.1", "--from", "secr@mail.gr", "--to",
            "professor@mail.gr", "--send"},
           {"cost", "--employees", "0", "--workdays", "230", "--wage", "15",
            "--spam-per-day", "25", "--seconds-per-spam", "3"},
       }) {
    auto r = invoke(args);
    EXPECT_EQ(r.code, 2) << (args.empty() ? "<none>" : args[0]);
    EXPECT_FALSE(r.err.empty());
  }
  // Synopsis on usage errors.
  EXPECT_NE(invoke({"bogus"}).err.find("Usage"), std::string::npos);
}

TEST(Cli, SendWithoutAckPerformsNoNetworkIo) {
  MemorySpool sink;
  ServerOptions options;
  options.port = 0;
  Server server(Policy(PolicyMode::Open, "h"), {}, sink, options);
  server.start();
  auto r = invoke({"audit", "--host", "127.0.0.1", "--port", std::to_string(server.port()),
                "--from", "secr@mail.gr", "--to", "professor@mail.gr", "--send"});
  server.stop();
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(server.connections_served(), 0u);
}

TEST(Cli, Adduser) {
  const auto file = temp_path("users.json");
  fs::remove(file);
  auto r = invoke({"adduser", "--users", file.string(), "--name", "secr"}, "s3cret");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(CredentialStore::load(file).verify("secr", "s3cret"));
  r = invoke({"--json", "adduser", "--users", file.string(), "--name", "secr"}, "other");
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("replaced"), true);
  EXPECT_TRUE(CredentialStore::load(file).verify("secr", "other"));
  EXPECT_EQ(invoke({"adduser", "--users", file.string(), "--name", "x"}, std::nullopt).code, 2);
  EXPECT_EQ(invoke({"adduser", "--users", file.string(), "--name", "a:b"}, "pw").code, 2);
  fs::remove(file);
}

TEST(Cli, AuditVerdictsAndExitCodes) {
  MemorySpool sink;
  ServerOptions options;
  options.port = 0;
  Server open(Policy(PolicyMode::Open, "h"), {}, sink, options);
  Server auth(Policy(PolicyMode::AuthRequired, "h"), {}, sink, options);
  open.start();
  auth.start();
  auto audit = [](std::uint16_t port, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"audit", "--host", "127.0.0.1", "--port",
                                  std::to_string(port), "--from", "secr@mail.gr", "--to",
                                  "professor@mail.gr", "--timeout", "5"};
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(args);
  };
  auto v = audit(open.port());
  EXPECT_EQ(v.code, 1);
  EXPECT_NE(v.out.find("verdict Vulnerable"), std::string::npos);
  EXPECT_NE(v.out.find("127.xx.yy.zz"), std::string::npos);
  auto s = audit(auth.port());
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("verdict Secured"), std::string::npos);

  const auto report = temp_path("report.json");
  auto j = audit(open.port(), {"--json", report.string(), "--no-anonymize"});
  EXPECT_EQ(j.code, 1);
  std::ifstream in(report);
  auto rows = audit::rows_from_json(nlohmann::json::parse(in));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].host, "127.0.0.1");
  EXPECT_EQ(rows[0].result.verdict, audit::Verdict::Vulnerable);
  fs::remove(report);

  const auto open_port = open.port();
  open.stop();
  auth.stop();
  auto gone = audit(open_port);
  EXPECT_EQ(gone.code, 2);
  EXPECT_NE(gone.out.find("Indeterminate"), std::string::npos);
  EXPECT_TRUE(sink.messages().empty());
}

TEST(Cli, ServeStopsOnFlag) {
  const auto dir = temp_path("spool");
  fs::create_directories(dir);
  std::atomic<bool> stop{false};
  std::ostringstream out, err;
  cli::Io io{out, err, {}, &stop};
  std::thread t([&] {
    cli::run({"serve", "--mode", "open", "--port", "0", "--spool", dir.string(), "--hostname",
              "h"},
             io);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  stop = true;
  t.join();
  EXPECT_NE(out.str().find("listening"), std::string::npos);
  fs::remove_all(dir);

  std::ostringstream out2, err2;
  cli::Io io2{out2, err2, {}, &stop};
  EXPECT_EQ(cli::run({"serve", "--mode", "open", "--port", "0", "--spool",
                      (dir / "missing").string(), "--hostname", "h"},
                     io2),
            2);
}
