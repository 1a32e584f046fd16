#pragma once

// Civil calendar dates (proleptic Gregorian, no time zones, no DST).

#include <charconv>
#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "srdm/error.hpp"

namespace srdm {

class Date {
 public:
  Date() = default;
  Date(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) {
      throw ParseError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) +
                       "-" + std::to_string(day));
    }
    days_ = std::chrono::sys_days{ymd};
  }
  explicit Date(std::chrono::sys_days days) : days_(days) {}

  /// Parses `YYYY-MM-DD`.
  static Date parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
      throw ParseError("expected date YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    const int y = parse_int(text.substr(0, 4));
    const int m = parse_int(text.substr(5, 2));
    const int d = parse_int(text.substr(8, 2));
    return Date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  }

  std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
  int year() const { return static_cast<int>(ymd().year()); }
  unsigned month() const { return static_cast<unsigned>(ymd().month()); }
  unsigned day() const { return static_cast<unsigned>(ymd().day()); }

  /// 1-based day of year.
  int day_of_year() const {
    const std::chrono::sys_days jan1{std::chrono::year{year()} / std::chrono::January / 1};
    return static_cast<int>((days_ - jan1).count()) + 1;
  }

  std::chrono::sys_days sys_days() const { return days_; }
  long long serial() const { return days_.time_since_epoch().count(); }

  Date next() const { return Date(days_ + std::chrono::days{1}); }
  Date prev() const { return Date(days_ - std::chrono::days{1}); }
  Date plus_days(long long n) const { return Date(days_ + std::chrono::days{n}); }
  long long days_until(const Date& other) const { return (other.days_ - days_).count(); }

  std::string to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year(), month(), day());
    return buf;
  }

  friend auto operator<=>(const Date&, const Date&) = default;
  friend bool operator==(const Date&, const Date&) = default;

 private:
  static int parse_int(std::string_view s) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw ParseError("bad integer field '" + std::string(s) + "'");
    }
    return value;
  }

  std::chrono::sys_days days_{};
};

inline bool is_leap_year(int year) {
  return std::chrono::year{year}.is_leap();
}

inline int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

}  // namespace srdm
