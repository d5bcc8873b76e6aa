#pragma once

// STRIDE categories and DREAD risk scoring.

#include <array>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>
#include <nlohmann/json_fwd.hpp>

namespace smtpguard::threat {

enum class StrideCategory {
  Spoofing,
  Tampering,
  Repudiation,
  InformationDisclosure,
  DenialOfService,
  ElevationOfPrivilege,
};

inline constexpr std::array<StrideCategory, 6> all_categories{
    StrideCategory::Spoofing,        StrideCategory::Tampering,
    StrideCategory::Repudiation,     StrideCategory::InformationDisclosure,
    StrideCategory::DenialOfService, StrideCategory::ElevationOfPrivilege,
};

std::string_view name(StrideCategory c);
StrideCategory parse_category(std::string_view text);

/// The stored one-line definition of the category.
std::string_view describe(StrideCategory c);

enum class DreadAttribute {
  DamagePotential,
  Reproducibility,
  Exploitability,
  AffectedUsers,
  Discoverability,
};

std::string_view name(DreadAttribute a);
/// Stored definition. The affected-users text is kept as published, which
/// is missing a verb ("The parties by the exploitation ...").
std::string_view describe(DreadAttribute a);

using Risk = boost::rational<long long>;

/// Five ratings, each an integer in [1, 10].
class DreadScore {
public:
  /// Throws InvalidArgument if any rating is outside 1..10.
  DreadScore(int damage_potential, int reproducibility, int exploitability,
             int affected_users, int discoverability);

  int damage_potential() const noexcept { return ratings_[0]; }
  int reproducibility() const noexcept { return ratings_[1]; }
  int exploitability() const noexcept { return ratings_[2]; }
  int affected_users() const noexcept { return ratings_[3]; }
  int discoverability() const noexcept { return ratings_[4]; }

  int get(DreadAttribute a) const noexcept { return ratings_[static_cast<int>(a)]; }
  /// Copy with one rating replaced (validated).
  DreadScore with(DreadAttribute a, int value) const;

  bool operator==(const DreadScore&) const = default;

private:
  std::array<int, 5> ratings_;
};

/// Arithmetic mean of the five ratings, exact.
Risk risk(const DreadScore& score);

/// One decimal place. The mean of five integers is always a whole number of
/// tenths, so this is exact.
std::string format_risk(const Risk& r);

struct ThreatRecord {
  std::string name;
  std::set<StrideCategory> categories; // non-empty
  DreadScore score;
  std::string notes;

  bool operator==(const ThreatRecord&) const = default;
};

/// Descending risk, ties broken by ascending name. Throws InvalidArgument
/// for a record without categories.
std::vector<ThreatRecord> rank(std::vector<ThreatRecord> threats);

nlohmann::json to_json(const ThreatRecord& t);
ThreatRecord threat_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<ThreatRecord>& threats);
std::vector<ThreatRecord> threats_from_json(const nlohmann::json& j);

/// Email spoofing and phishing entries used as a worked example.
std::vector<ThreatRecord> mail_threat_catalogue();

} // namespace smtpguard::threat
