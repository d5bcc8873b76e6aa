#include "smtpguard/threat_model.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "smtpguard/error.hpp"

namespace smtpguard::threat {

std::string_view name(StrideCategory c) {
  switch (c) {
  case StrideCategory::Spoofing: return "Spoofing";
  case StrideCategory::Tampering: return "Tampering";
  case StrideCategory::Repudiation: return "Repudiation";
  case StrideCategory::InformationDisclosure: return "InformationDisclosure";
  case StrideCategory::DenialOfService: return "DenialOfService";
  case StrideCategory::ElevationOfPrivilege: return "ElevationOfPrivilege";
  }
  return "?";
}

StrideCategory parse_category(std::string_view text) {
  for (auto c : all_categories) {
    if (name(c) == text) {
      return c;
    }
  }
  throw InvalidArgument("unknown STRIDE category: " + std::string(text));
}

std::string_view describe(StrideCategory c) {
  switch (c) {
  case StrideCategory::Spoofing:
    return "Attempt to gain access to a system using a forged identity. A "
           "compromised system would have access control vulnerability.";
  case StrideCategory::Tampering:
    return "Manipulation of data during communication through the network. "
           "The integrity of the data is threatened.";
  case StrideCategory::Repudiation:
    return "Denial of participation in a transaction. The availability of a "
           "resource is threatened.";
  case StrideCategory::InformationDisclosure:
    return "Unwanted exposure and loss of confidentiality of private data.";
  case StrideCategory::DenialOfService:
    return "Attack on system availability through the depletion of system "
           "resources.";
  case StrideCategory::ElevationOfPrivilege:
    return "A user with limited privileges assumes the identity of a "
           "privileged user to gain access to an application. The "
           "confidentiality, integrity, and availability of a resource are "
           "threatened.";
  }
  return {};
}

std::string_view name(DreadAttribute a) {
  switch (a) {
  case DreadAttribute::DamagePotential: return "Damage potential";
  case DreadAttribute::Reproducibility: return "Reproducibility";
  case DreadAttribute::Exploitability: return "Exploitability";
  case DreadAttribute::AffectedUsers: return "Affected users";
  case DreadAttribute::Discoverability: return "Discoverability";
  }
  return "?";
}

std::string_view describe(DreadAttribute a) {
  switch (a) {
  case DreadAttribute::DamagePotential:
    return "The damage that will be done if the vulnerability is exploited by "
           "the attacker.";
  case DreadAttribute::Reproducibility:
    return "The ease of repeatedly exploiting a vulnerability.";
  case DreadAttribute::Exploitability:
    return "The skill level required to exploit a vulnerability.";
  case DreadAttribute::AffectedUsers:
    return "The parties by the exploitation of a vulnerability.";
  case DreadAttribute::Discoverability:
    return "The ease of exploration and discovery of a vulnerability.";
  }
  return {};
}

DreadScore::DreadScore(int damage_potential, int reproducibility, int exploitability,
                       int affected_users, int discoverability)
    : ratings_{damage_potential, reproducibility, exploitability, affected_users,
               discoverability} {
  for (std::size_t i = 0; i < ratings_.size(); ++i) {
    if (ratings_[i] < 1 || ratings_[i] > 10) {
      throw InvalidArgument(std::string(name(static_cast<DreadAttribute>(i))) +
                            " rating must be in 1..10, got " +
                            std::to_string(ratings_[i]));
    }
  }
}

DreadScore DreadScore::with(DreadAttribute a, int value) const {
  auto r = ratings_;
  r[static_cast<int>(a)] = value;
  return DreadScore(r[0], r[1], r[2], r[3], r[4]);
}

Risk risk(const DreadScore& s) {
  return Risk(s.damage_potential() + s.reproducibility() + s.exploitability() +
                  s.affected_users() + s.discoverability(),
              5);
}

std::string format_risk(const Risk& r) {
  // r = sum / 5 = (2 * sum) / 10
  const auto tenths = r.numerator() * (10 / r.denominator());
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::vector<ThreatRecord> rank(std::vector<ThreatRecord> threats) {
  for (const auto& t : threats) {
    if (t.categories.empty()) {
      throw InvalidArgument("threat '" + t.name + "' has no STRIDE category");
    }
  }
  std::stable_sort(threats.begin(), threats.end(),
                   [](const ThreatRecord& a, const ThreatRecord& b) {
                     const auto ra = risk(a.score);
                     const auto rb = risk(b.score);
                     if (ra != rb) {
                       return ra > rb;
                     }
                     return a.name < b.name;
                   });
  return threats;
}

nlohmann::json to_json(const ThreatRecord& t) {
  auto cats = nlohmann::json::array();
  for (auto c : t.categories) {
    cats.push_back(name(c));
  }
  return {
      {"name", t.name},
      {"categories", cats},
      {"dread",
       {{"damage_potential", t.score.damage_potential()},
        {"reproducibility", t.score.reproducibility()},
        {"exploitability", t.score.exploitability()},
        {"affected_users", t.score.affected_users()},
        {"discoverability", t.score.discoverability()}}},
      {"risk", format_risk(risk(t.score))},
      {"notes", t.notes},
  };
}

ThreatRecord threat_from_json(const nlohmann::json& j) {
  const auto& d = j.at("dread");
  std::set<StrideCategory> cats;
  for (const auto& c : j.at("categories")) {
    cats.insert(parse_category(c.get<std::string>()));
  }
  if (cats.empty()) {
    throw InvalidArgument("threat needs at least one STRIDE category");
  }
  return ThreatRecord{
      j.at("name").get<std::string>(),
      std::move(cats),
      DreadScore(d.at("damage_potential").get<int>(), d.at("reproducibility").get<int>(),
                 d.at("exploitability").get<int>(), d.at("affected_users").get<int>(),
                 d.at("discoverability").get<int>()),
      j.value("notes", std::string{}),
  };
}

nlohmann::json to_json(const std::vector<ThreatRecord>& threats) {
  auto out = nlohmann::json::array();
  for (const auto& t : threats) {
    out.push_back(to_json(t));
  }
  return out;
}

std::vector<ThreatRecord> threats_from_json(const nlohmann::json& j) {
  std::vector<ThreatRecord> out;
  for (const auto& t : j) {
    out.push_back(threat_from_json(t));
  }
  return out;
}

std::vector<ThreatRecord> mail_threat_catalogue() {
  return {
      {"Envelope sender spoofing via unauthenticated MAIL FROM",
       {StrideCategory::Spoofing},
       DreadScore(10, 10, 7, 10, 10),
       "Any client that can reach port 25 may claim a local sender."},
      {"Phishing for credentials with a forged internal sender",
       {StrideCategory::Spoofing, StrideCategory::InformationDisclosure},
       DreadScore(9, 8, 6, 8, 7),
       ""},
      {"Credential sniffing of Base64 AUTH LOGIN without TLS",
       {StrideCategory::InformationDisclosure},
       DreadScore(8, 5, 4, 3, 5),
       "Base64 is an encoding, not encryption."},
      {"Connection exhaustion of the mail listener",
       {StrideCategory::DenialOfService},
       DreadScore(5, 9, 8, 10, 6),
       "Bounded by the per-server connection cap."},
  };
}

} // namespace smtpguard::threat
