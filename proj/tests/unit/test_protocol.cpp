#include <random>
#include <regex>

#include <gtest/gtest.h>
#include <openssl/evp.h>

#include "smtpguard/base64.hpp"
#include "smtpguard/error.hpp"
#include "smtpguard/message.hpp"
#include "smtpguard/protocol.hpp"
#include "smtpguard/testkit.hpp"

using namespace smtpguard;

namespace {

const std::vector<std::string> ehlo_block{
    "250-smtp.mail.gr",  "250-PIPELINING",           "250-SIZE 8192000",
    "250-ETRN",          "250-STARTTLS",             "250-AUTH LOGIN PLAIN",
    "250-AUTH=LOGIN PLAIN", "250-ENHANCEDSTATUSCODES", "250-8BITMIME",
    "250 DSN",
};

ProtocolError::Kind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const ProtocolError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ProtocolError thrown";
  return ProtocolError::Kind::MalformedCommand;
}

std::string openssl_base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string random_bytes(std::mt19937_64& rng, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> byte(0, 255);
  std::string s(len(rng), '\0');
  for (auto& c : s) {
    c = static_cast<char>(byte(rng));
  }
  return s;
}

} // namespace

// --- addresses and commands -------------------------------------------------

TEST(Address, ParsesParts) {
  auto a = Address::parse("secr@mail.gr");
  EXPECT_EQ(a.str(), "secr@mail.gr");
  EXPECT_EQ(a.local_part(), "secr");
  EXPECT_EQ(a.domain(), "mail.gr");
}

TEST(Address, RejectsMalformed) {
  for (const char* bad : {"", "nobody", "a@@b", "a@b@c", "@b", "a@", "a b@c", "<a@b>", "a@b\r"}) {
    EXPECT_THROW(Address::parse(bad), ProtocolError) << bad;
  }
}

TEST(ParseCommand, SpecExamples) {
  EXPECT_EQ(parse_command("MAIL FROM:<secr@mail.gr>"),
            Command(cmd::Mail{Address::parse("secr@mail.gr")}));
  EXPECT_EQ(parse_command("QUIT"), Command(cmd::Quit{}));
  EXPECT_EQ(parse_command("mail from:<a@b.c>"), Command(cmd::Mail{Address::parse("a@b.c")}));
  EXPECT_EQ(error_kind([] { parse_command("MAIL FROM:no-brackets"); }),
            ProtocolError::Kind::MalformedAddress);
}

TEST(ParseCommand, Variants) {
  EXPECT_EQ(parse_command("EHLO www.test.com"), Command(cmd::Ehlo{"www.test.com"}));
  EXPECT_EQ(parse_command("helo x"), Command(cmd::Helo{"x"}));
  EXPECT_EQ(parse_command("RCPT TO:<professor@mail.gr>"),
            Command(cmd::Rcpt{Address::parse("professor@mail.gr")}));
  EXPECT_EQ(parse_command("MAIL FROM: <a@b.c> SIZE=100"),
            Command(cmd::Mail{Address::parse("a@b.c")}));
  EXPECT_EQ(parse_command("data"), Command(cmd::Data{}));
  EXPECT_EQ(parse_command("RSET"), Command(cmd::Rset{}));
  EXPECT_EQ(parse_command("NOOP"), Command(cmd::Noop{}));
  EXPECT_EQ(parse_command("STARTTLS"), Command(cmd::StartTls{}));
  EXPECT_EQ(parse_command("AUTH LOGIN"), Command(cmd::AuthLogin{}));
  EXPECT_EQ(parse_command("AUTH PLAIN"), Command(cmd::AuthPlain{}));
  EXPECT_EQ(parse_command("AUTH PLAIN AGEAYg=="), Command(cmd::AuthPlain{"AGEAYg=="}));
  EXPECT_EQ(parse_command("AUTH CRAM-MD5"), Command(cmd::Unknown{"AUTH CRAM-MD5"}));
  EXPECT_EQ(parse_command("vrfy root"), Command(cmd::Unknown{"VRFY"}));
}

TEST(ParseCommand, LineLimits) {
  EXPECT_NO_THROW(parse_command("NOOP " + std::string(max_line_length - 5, 'x')));
  EXPECT_EQ(error_kind([] { parse_command("NOOP " + std::string(max_line_length, 'x')); }),
            ProtocolError::Kind::LineTooLong);
  EXPECT_EQ(error_kind([] { parse_command(std::string("NOOP\0x", 6)); }),
            ProtocolError::Kind::MalformedCommand);
}

TEST(ParseCommand, SerializeRoundTrip) {
  const std::vector<Command> commands{
      cmd::Helo{"a.b"},     cmd::Ehlo{"www.test.com"},
      cmd::AuthLogin{},     cmd::AuthPlain{},
      cmd::AuthPlain{"eA=="}, cmd::Mail{Address::parse("secr@mail.gr")},
      cmd::Rcpt{Address::parse("professor@mail.gr")}, cmd::Data{},
      cmd::Quit{},          cmd::Rset{},
      cmd::Noop{},          cmd::StartTls{},
  };
  for (const auto& c : commands) {
    const auto wire = serialize(c);
    EXPECT_EQ(parse_command(wire), c) << wire;
  }
  EXPECT_EQ(serialize(parse_command("mail from:<secr@mail.gr>")), "MAIL FROM:<secr@mail.gr>");
}

// --- replies -------------------------------------------------------------------

TEST(Reply, RenderExamples) {
  EXPECT_EQ(render_reply_lines(Reply(221, EnhancedStatus{2, 0, 0}, "Bye")),
            std::vector<std::string>{"221 2.0.0 Bye"});
  EXPECT_EQ(render_reply_lines(Reply(220, std::nullopt, "x")), std::vector<std::string>{"220 x"});
  EXPECT_EQ(render_reply(Reply(220, std::nullopt, "x")), "220 x\r\n");

  std::vector<std::string> text{"smtp.mail.gr", "PIPELINING",  "SIZE 8192000",
                                "ETRN",         "STARTTLS",    "AUTH LOGIN PLAIN",
                                "AUTH=LOGIN PLAIN", "ENHANCEDSTATUSCODES", "8BITMIME",
                                "DSN"};
  EXPECT_EQ(render_reply_lines(Reply(250, std::nullopt, text)), ehlo_block);
}

TEST(Reply, Invariants) {
  EXPECT_THROW(Reply(199, std::nullopt, "x"), InvalidArgument);
  EXPECT_THROW(Reply(600, std::nullopt, "x"), InvalidArgument);
  EXPECT_THROW(Reply(250, std::nullopt, std::vector<std::string>{}), InvalidArgument);
  EXPECT_THROW(Reply(250, std::nullopt, "a\r\nb"), InvalidArgument);
  EXPECT_THROW(Reply(250, EnhancedStatus{5, 1, 1}, "x"), InvalidArgument);
  EXPECT_THROW(Reply(354, EnhancedStatus{3, 0, 0}, "x"), InvalidArgument);
}

TEST(Reply, ParseExamples) {
  EXPECT_EQ(parse_reply(std::string_view("250 2.1.5 Ok")),
            Reply(250, EnhancedStatus{2, 1, 5}, "Ok"));
  EXPECT_EQ(error_kind([] { parse_reply(std::string_view("250-a\n251 b")); }),
            ProtocolError::Kind::MalformedReply);
  EXPECT_EQ(error_kind([] { parse_reply(std::string_view("250-a")); }),
            ProtocolError::Kind::MalformedReply);
  EXPECT_EQ(error_kind([] { parse_reply(std::string_view("25x ok")); }),
            ProtocolError::Kind::MalformedReply);
}

TEST(Reply, RoundTripOnSampleTranscript) {
  std::vector<std::vector<std::string>> replies{
      {"220 smtp.mail.gr M.T.A."},
      ehlo_block,
      {"250 2.1.5 Ok"},
      {"250 2.0.0 Ok: queued as 492381B9295"},
      {"221 2.0.0 Bye"},
  };
  for (const auto& lines : replies) {
    EXPECT_EQ(render_reply_lines(parse_reply(lines)), lines);
  }
}

TEST(Reply, RandomRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> code(200, 599), nlines(1, 5), len(1, 20),
      ch(0x20, 0x7e), coin(0, 1), digit(0, 9);
  for (int i = 0; i < 2000; ++i) {
    const int c = code(rng);
    std::optional<EnhancedStatus> enhanced;
    if (c / 100 != 3 && coin(rng)) {
      enhanced = EnhancedStatus{c / 100, digit(rng), digit(rng) * 10 + digit(rng)};
    }
    std::vector<std::string> lines(static_cast<std::size_t>(nlines(rng)));
    for (auto& l : lines) {
      l.resize(static_cast<std::size_t>(len(rng)));
      for (auto& x : l) {
        x = static_cast<char>(ch(rng));
      }
      // Keep text from looking like an enhanced status of its own.
      l[0] = 'q';
    }
    Reply r(c, enhanced, lines);
    EXPECT_EQ(parse_reply(render_reply_lines(r)), r);
    EXPECT_EQ(parse_reply(std::string_view(render_reply(r))), r);
  }
}

TEST(Reply, PeekLine) {
  auto head = peek_reply_line("250-PIPELINING");
  ASSERT_TRUE(head);
  EXPECT_EQ(head->code, 250);
  EXPECT_FALSE(head->last);
  EXPECT_TRUE(peek_reply_line("250 DSN")->last);
  EXPECT_TRUE(peek_reply_line("250")->last);
  EXPECT_FALSE(peek_reply_line("2x0 a"));
  EXPECT_FALSE(peek_reply_line("250+x"));
}

// --- base64 ----------------------------------------------------------------------

TEST(Base64, Examples) {
  EXPECT_EQ(encode_base64(std::string_view("")), "");
  EXPECT_EQ(encode_base64(std::string_view("secr")), "c2Vjcg==");
  EXPECT_EQ(decode_base64("c2Vjcg=="), "secr");
  EXPECT_EQ(decode_base64("VXNlcm5hbWU6"), "Username:");
  EXPECT_EQ(decode_base64("UGFzc3dvcmQ6"), "Password:");
}

TEST(Base64, MatchesOpenSsl) {
  EXPECT_EQ(openssl_base64("secr"), "c2Vjcg==");
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto bytes = random_bytes(rng, 1024);
    EXPECT_EQ(encode_base64(std::string_view(bytes)), openssl_base64(bytes));
  }
}

TEST(Base64, RoundTrip) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const auto bytes = random_bytes(rng, 1024);
    EXPECT_EQ(decode_base64(encode_base64(std::string_view(bytes))), bytes);
  }
}

TEST(Base64, RejectsInvalid) {
  for (const char* bad : {"c2Vjcg=", "c2Vj*g==", "c2V=cg==", "=c2V", "c2Vjcg===", "c2Vjc==="}) {
    EXPECT_EQ(error_kind([bad] { decode_base64(bad); }), ProtocolError::Kind::InvalidBase64)
        << bad;
  }
}

// --- dot stuffing ------------------------------------------------------------------

TEST(DotStuff, Examples) {
  EXPECT_EQ(dot_stuff("hello"), "hello");
  EXPECT_EQ(dot_stuff(".hi"), "..hi");
  EXPECT_EQ(dot_stuff("a\r\n.\r\nb\r\n"), "a\r\n..\r\nb\r\n");
  EXPECT_EQ(dot_unstuff("..hi"), ".hi");
  const auto body = testkit::sample_spoofed_message().to_wire();
  EXPECT_EQ(dot_stuff(body), body);
}

TEST(DotStuff, MatchesRegexOracleAndRoundTrips) {
  const std::regex leading_dot("(^|\n)\\.");
  std::mt19937_64 rng(13);
  const std::string alphabet = "..\r\nab. ";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 200);
  for (int i = 0; i < 1000; ++i) {
    std::string s(len(rng), ' ');
    for (auto& c : s) {
      c = alphabet[pick(rng)];
    }
    EXPECT_EQ(dot_stuff(s), std::regex_replace(s, leading_dot, "$1.."));
    EXPECT_EQ(dot_unstuff(dot_stuff(s)), s);
  }
}

TEST(Message, WireForm) {
  MailMessage m{{{"Subject", "x"}}, "a\nb"};
  EXPECT_EQ(m.to_wire(), "Subject: x\r\n\r\na\r\nb\r\n");
  MailMessage empty{{{"Subject", "x"}}, ""};
  EXPECT_EQ(empty.to_wire(), "Subject: x\r\n\r\n");
}
