#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "smtpguard/cost_model.hpp"
#include "smtpguard/error.hpp"

using namespace smtpguard;
using namespace smtpguard::cost;

namespace {

CostInputs table_inputs() {
  CostInputs in;
  in.employees = 680;
  in.workdays_per_year = 230;
  in.hourly_wage = parse_decimal("15.00");
  in.spam_per_day_per_employee = 25;
  in.seconds_per_spam = 3;
  return in;
}

} // namespace

// Exact values worked by hand: 680*230*25*3 s = 11,730,000 s = 9775/3 h.
TEST(Cost, TableInputs) {
  const auto r = compute(table_inputs());
  EXPECT_EQ(r.annual_hours_lost, Rational(9775, 3));
  EXPECT_EQ(r.annual_cost, Rational(48875));
  EXPECT_EQ(r.daily_cost, Rational(425, 2));
  EXPECT_EQ(r.annual_cost_per_employee, Rational(575, 8));
  EXPECT_EQ(r.daily_cost_per_employee, Rational(5, 16));
  EXPECT_EQ(r.annual_productivity_days, Rational(9775, 24));

  EXPECT_EQ(format_fixed(r.annual_cost, 2, Locale::En), "48,875.00");
  EXPECT_EQ(format_fixed(r.daily_cost, 2, Locale::En), "212.50");
  EXPECT_EQ(format_fixed(r.annual_cost_per_employee, 2, Locale::En), "71.88");
  EXPECT_EQ(format_fixed(r.daily_cost_per_employee, 2, Locale::En), "0.31");
  EXPECT_EQ(format_fixed(r.annual_hours_lost, 2, Locale::En), "3,258.33");
  EXPECT_EQ(format_fixed(r.annual_productivity_days, 2, Locale::En), "407.29");
}

TEST(Cost, ZeroRate) {
  auto in = table_inputs();
  in.spam_per_day_per_employee = 0;
  const auto r = compute(in);
  EXPECT_EQ(r, CostReport{});
  const auto table = render_cost_table(r, Locale::En);
  EXPECT_NE(table.find("0.00"), std::string::npos);
  for (char d = '1'; d <= '9'; ++d) {
    EXPECT_EQ(table.find(d), std::string::npos) << table;
  }
}

TEST(Cost, InvalidInputs) {
  auto in = table_inputs();
  in.employees = 0;
  EXPECT_THROW(compute(in), InvalidArgument);
  in = table_inputs();
  in.employees = Rational(3, 2);
  EXPECT_THROW(compute(in), InvalidArgument);
  in = table_inputs();
  in.workdays_per_year = -1;
  EXPECT_THROW(compute(in), InvalidArgument);
  in = table_inputs();
  in.hourly_wage = 0;
  EXPECT_THROW(compute(in), InvalidArgument);
  in = table_inputs();
  in.seconds_per_spam = -1;
  EXPECT_THROW(compute(in), InvalidArgument);
}

TEST(Cost, RoundingAndLocales) {
  EXPECT_EQ(round_half_up(Rational(5, 1000), 2), Rational(1, 100));
  EXPECT_EQ(round_half_up(Rational(4999, 1000000), 2), Rational(0));
  EXPECT_EQ(format_fixed(Rational(48875), 2, Locale::Eu), "48.875,00");
  EXPECT_EQ(format_fixed(Rational(1234567891, 100), 2, Locale::En), "12,345,678.91");
  EXPECT_EQ(format_fixed(Rational(999), 0, Locale::En), "999");
  EXPECT_EQ(format_fixed(Rational(1, 200), 2, Locale::En), "0.01");
  EXPECT_EQ(parse_locale("eu"), Locale::Eu);
  EXPECT_THROW(parse_locale("fr"), InvalidArgument);
}

TEST(Cost, ParseDecimal) {
  EXPECT_EQ(parse_decimal("15"), Rational(15));
  EXPECT_EQ(parse_decimal("15.00"), Rational(15));
  EXPECT_EQ(parse_decimal("15,50"), Rational(31, 2));
  EXPECT_EQ(parse_decimal(".5"), Rational(1, 2));
  EXPECT_EQ(parse_decimal("-2.25"), Rational(-9, 4));
  for (const char* bad : {"", "1.", "abc", "1.2.3", "1e3", "--1"}) {
    EXPECT_THROW(parse_decimal(bad), InvalidArgument) << bad;
  }
}

TEST(Cost, TableText) {
  const auto r = compute(table_inputs());
  EXPECT_NE(render_cost_table(r, Locale::En).find("48,875.00"), std::string::npos);
  EXPECT_NE(render_cost_table(r, Locale::Eu).find("48.875,00"), std::string::npos);
}

TEST(Cost, JsonRoundTrip) {
  const auto in = table_inputs();
  const auto r = compute(in);
  const auto j = nlohmann::json::parse(cost_to_json(in, r, Locale::En).dump());
  EXPECT_EQ(j.at("annual_cost").at("display"), "48,875.00");
  EXPECT_EQ(j.at("annual_cost_per_employee").at("exact"), "575/8");
  EXPECT_EQ(report_from_json(j), r);
  EXPECT_EQ(parse_exact("9775/3"), Rational(9775, 3));
  EXPECT_THROW(parse_exact("x/y"), InvalidArgument);
}

// Cost is linear in each multiplicative input and monotone in all of them.
TEST(Cost, LinearityAndMonotonicity) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> small(1, 500);
  for (int i = 0; i < 1000; ++i) {
    CostInputs in;
    in.employees = small(rng);
    in.workdays_per_year = small(rng) % 366 + 1;
    in.hourly_wage = Rational(small(rng), 4);
    in.spam_per_day_per_employee = small(rng) % 100;
    in.seconds_per_spam = small(rng) % 20;
    const auto base = compute(in);

    auto doubled = in;
    doubled.spam_per_day_per_employee *= 2;
    EXPECT_EQ(compute(doubled).annual_cost, base.annual_cost * 2);

    auto more_staff = in;
    more_staff.employees += 1;
    EXPECT_GE(compute(more_staff).annual_cost, base.annual_cost);
    // Per-employee annual cost does not depend on headcount.
    EXPECT_EQ(compute(more_staff).annual_cost_per_employee, base.annual_cost_per_employee);

    auto pricier = in;
    pricier.hourly_wage += 1;
    EXPECT_GE(compute(pricier).annual_cost, base.annual_cost);
    EXPECT_EQ(base.daily_cost * in.workdays_per_year, base.annual_cost);
  }
}
