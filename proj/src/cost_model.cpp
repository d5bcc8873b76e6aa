#include "smtpguard/cost_model.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smtpguard/error.hpp"

namespace smtpguard::cost {

using boost::multiprecision::cpp_int;

namespace {

bool is_integer(const Rational& r) { return denominator(r) == 1; }

cpp_int pow10(int n) {
  cpp_int p = 1;
  for (int i = 0; i < n; ++i) {
    p *= 10;
  }
  return p;
}

std::string group_thousands(const std::string& digits, char separator) {
  std::string out;
  const auto n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i != 0 && (n - i) % 3 == 0) {
      out += separator;
    }
    out += digits[i];
  }
  return out;
}

} // namespace

void CostInputs::validate() const {
  if (employees <= 0 || !is_integer(employees)) {
    throw InvalidArgument("employees must be a positive integer");
  }
  if (workdays_per_year <= 0 || !is_integer(workdays_per_year)) {
    throw InvalidArgument("workdays per year must be a positive integer");
  }
  if (hourly_wage <= 0) {
    throw InvalidArgument("hourly wage must be positive");
  }
  if (hours_per_workday <= 0) {
    throw InvalidArgument("hours per workday must be positive");
  }
  if (spam_per_day_per_employee < 0 || seconds_per_spam < 0) {
    throw InvalidArgument("spam rate and seconds per spam must not be negative");
  }
}

CostReport compute(const CostInputs& in) {
  in.validate();
  CostReport r;
  r.annual_hours_lost = in.employees * in.workdays_per_year *
                        in.spam_per_day_per_employee * in.seconds_per_spam /
                        Rational(3600);
  r.annual_cost = r.annual_hours_lost * in.hourly_wage;
  r.daily_cost = r.annual_cost / in.workdays_per_year;
  r.annual_cost_per_employee = r.annual_cost / in.employees;
  r.daily_cost_per_employee = r.daily_cost / in.employees;
  r.annual_productivity_days = r.annual_hours_lost / in.hours_per_workday;
  r.per_employee_productivity_days = r.annual_productivity_days / in.employees;
  return r;
}

Locale parse_locale(std::string_view text) {
  if (text == "en") return Locale::En;
  if (text == "eu") return Locale::Eu;
  throw InvalidArgument("locale must be 'en' or 'eu'");
}

Rational parse_decimal(std::string_view text) {
  if (text.empty()) {
    throw InvalidArgument("empty number");
  }
  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  auto sep = text.find_first_of(".,");
  auto whole = text.substr(0, sep);
  auto frac = sep == std::string_view::npos ? std::string_view{} : text.substr(sep + 1);
  auto digits_only = [](std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if ((whole.empty() && frac.empty()) || !digits_only(whole) || !digits_only(frac) ||
      (sep != std::string_view::npos && frac.empty()) || frac.size() > 18) {
    throw InvalidArgument("not a decimal number: " + std::string(text));
  }
  cpp_int value = whole.empty() ? cpp_int(0) : cpp_int(std::string(whole));
  cpp_int scale = pow10(static_cast<int>(frac.size()));
  if (!frac.empty()) {
    value = value * scale + cpp_int(std::string(frac));
  }
  Rational r(value, scale);
  return negative ? Rational(-r) : r;
}

Rational round_half_up(const Rational& value, int decimals) {
  if (value < 0) {
    throw InvalidArgument("cannot round negative amounts");
  }
  const cpp_int scale = pow10(decimals);
  const cpp_int n = numerator(value) * scale;
  const cpp_int d = denominator(value);
  const cpp_int rounded = (2 * n + d) / (2 * d);
  return Rational(rounded, scale);
}

std::string format_fixed(const Rational& value, int decimals, Locale locale) {
  const auto rounded = round_half_up(value, decimals);
  const cpp_int scale = pow10(decimals);
  const cpp_int scaled = numerator(Rational(rounded * Rational(scale)));
  const std::string whole = cpp_int(scaled / scale).str();
  std::string frac = cpp_int(scaled % scale).str();
  frac.insert(0, static_cast<std::size_t>(decimals) - std::min<std::size_t>(frac.size(), decimals), '0');

  const char group = locale == Locale::En ? ',' : '.';
  const char point = locale == Locale::En ? '.' : ',';
  auto out = group_thousands(whole, group);
  if (decimals > 0) {
    out += point;
    out += frac;
  }
  return out;
}

std::string exact_string(const Rational& value) {
  if (denominator(value) == 1) {
    return numerator(value).str();
  }
  return numerator(value).str() + "/" + denominator(value).str();
}

Rational parse_exact(std::string_view text) {
  auto slash = text.find('/');
  try {
    if (slash == std::string_view::npos) {
      return Rational(cpp_int(std::string(text)));
    }
    return Rational(cpp_int(std::string(text.substr(0, slash))),
                    cpp_int(std::string(text.substr(slash + 1))));
  } catch (const std::exception&) {
    throw InvalidArgument("not an exact rational: " + std::string(text));
  }
}

std::string render_cost_table(const CostReport& r, Locale locale) {
  auto money = [&](const Rational& v) { return format_fixed(v, 2, locale); };
  std::vector<std::array<std::string, 3>> rows{
      {"", "Total corporate", "Per employee"},
      {"Financial cost (EUR) per year", money(r.annual_cost),
       money(r.annual_cost_per_employee)},
      {"Financial cost (EUR) per day", money(r.daily_cost), money(r.daily_cost_per_employee)},
      {"Productivity lost (days) per year", format_fixed(r.annual_productivity_days, 2, locale),
       format_fixed(r.per_employee_productivity_days, 2, locale)},
      {"Time lost (hours) per year", format_fixed(r.annual_hours_lost, 2, locale), ""},
  };
  std::array<std::size_t, 3> width{};
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < 3; ++i) {
      width[i] = std::max(width[i], row[i].size());
    }
  }
  std::string out;
  for (const auto& row : rows) {
    std::ostringstream line;
    line << std::left << std::setw(static_cast<int>(width[0])) << row[0] << "  "
         << std::right << std::setw(static_cast<int>(width[1])) << row[1] << "  "
         << std::setw(static_cast<int>(width[2])) << row[2];
    auto text = line.str();
    text.erase(text.find_last_not_of(' ') + 1);
    out += text + '\n';
  }
  return out;
}

nlohmann::json cost_to_json(const CostInputs& in, const CostReport& r, Locale locale) {
  auto field = [&](const Rational& v) {
    return nlohmann::json{{"exact", exact_string(v)},
                          {"display", format_fixed(v, 2, locale)},
                          {"value", static_cast<double>(v)}};
  };
  return {
      {"inputs",
       {{"employees", exact_string(in.employees)},
        {"workdays_per_year", exact_string(in.workdays_per_year)},
        {"hourly_wage", exact_string(in.hourly_wage)},
        {"spam_per_day_per_employee", exact_string(in.spam_per_day_per_employee)},
        {"seconds_per_spam", exact_string(in.seconds_per_spam)},
        {"hours_per_workday", exact_string(in.hours_per_workday)}}},
      {"locale", locale == Locale::En ? "en" : "eu"},
      {"annual_cost", field(r.annual_cost)},
      {"daily_cost", field(r.daily_cost)},
      {"annual_cost_per_employee", field(r.annual_cost_per_employee)},
      {"daily_cost_per_employee", field(r.daily_cost_per_employee)},
      {"annual_hours_lost", field(r.annual_hours_lost)},
      {"annual_productivity_days", field(r.annual_productivity_days)},
      {"per_employee_productivity_days", field(r.per_employee_productivity_days)},
  };
}

CostReport report_from_json(const nlohmann::json& j) {
  auto get = [&](const char* key) {
    return parse_exact(j.at(key).at("exact").get<std::string>());
  };
  return CostReport{get("annual_cost"),
                    get("daily_cost"),
                    get("annual_cost_per_employee"),
                    get("daily_cost_per_employee"),
                    get("annual_hours_lost"),
                    get("annual_productivity_days"),
                    get("per_employee_productivity_days")};
}

} // namespace smtpguard::cost
