#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace sbt {

// Calendar date with ISO-8601 (YYYY-MM-DD) text form.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::year_month_day ymd) : ymd_(ymd) {}
  Date(int y, unsigned m, unsigned d)
      : ymd_(std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}) {}

  // Accepts "YYYY-MM-DD" optionally followed by a 'T' time suffix
  // (e.g. "2020-03-09T14:00:00Z"). Returns nullopt on malformed or
  // impossible dates.
  static std::optional<Date> parse(std::string_view text);

  std::string to_string() const;
  bool ok() const { return ymd_.ok(); }

  Date plus_days(int n) const {
    return Date{std::chrono::year_month_day{std::chrono::sys_days{ymd_} + std::chrono::days{n}}};
  }
  long days_since_epoch() const {
    return std::chrono::sys_days{ymd_}.time_since_epoch().count();
  }

  friend bool operator==(const Date&, const Date&) = default;
  friend auto operator<=>(const Date& a, const Date& b) { return a.ymd_ <=> b.ymd_; }

 private:
  std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::month{1},
                                   std::chrono::day{1}};
};

}  // namespace sbt
