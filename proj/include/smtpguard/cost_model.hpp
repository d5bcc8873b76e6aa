#pragma once

// Spam cost calculator: time lost reading spam, priced at the hourly wage.

#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json_fwd.hpp>

namespace smtpguard::cost {

using Rational = boost::multiprecision::cpp_rational;

struct CostInputs {
  Rational employees;
  Rational workdays_per_year;
  Rational hourly_wage; // EUR
  Rational spam_per_day_per_employee;
  Rational seconds_per_spam;
  Rational hours_per_workday{8};

  /// Throws InvalidArgument: employees and workdays must be positive
  /// integers, wage and hours_per_workday positive, the rates non-negative.
  void validate() const;
};

struct CostReport {
  Rational annual_cost;
  Rational daily_cost;
  Rational annual_cost_per_employee;
  Rational daily_cost_per_employee;
  Rational annual_hours_lost;
  Rational annual_productivity_days;
  Rational per_employee_productivity_days;

  bool operator==(const CostReport&) const = default;
};

/// All arithmetic is exact; rounding happens only when formatting.
CostReport compute(const CostInputs& inputs);

enum class Locale { En, Eu };

Locale parse_locale(std::string_view text);

/// Accepts "15", "15.00", "15,00", "2.5". Throws InvalidArgument.
Rational parse_decimal(std::string_view text);

/// Half-up rounding to `decimals` places (non-negative values).
Rational round_half_up(const Rational& value, int decimals);

/// "48,875.00" (En) or "48.875,00" (Eu).
std::string format_fixed(const Rational& value, int decimals, Locale locale);

/// "num/den" in lowest terms, or "num" for integers.
std::string exact_string(const Rational& value);
Rational parse_exact(std::string_view text);

/// Corporate / per-employee by per-year / per-day, plus lost time.
std::string render_cost_table(const CostReport& report, Locale locale);

/// Inputs and outputs, each output carried as an exact rational string and
/// a rounded display string.
nlohmann::json cost_to_json(const CostInputs& inputs, const CostReport& report,
                            Locale locale);
CostReport report_from_json(const nlohmann::json& j);

} // namespace smtpguard::cost
