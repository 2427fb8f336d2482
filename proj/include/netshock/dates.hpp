#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace netshock {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

// Calendar month. index() is a dense month counter usable for panel offsets.
struct YearMonth {
  int year = 1970;
  int month = 1;

  auto operator<=>(const YearMonth&) const = default;

  int index() const noexcept { return year * 12 + (month - 1); }
  static YearMonth from_index(int idx) noexcept { return {idx / 12, idx % 12 + 1}; }
  YearMonth plus(int months) const noexcept { return from_index(index() + months); }
  int quarter() const noexcept { return (month - 1) / 3 + 1; }
};

inline YearMonth year_month_of(const Date& d) noexcept { return {d.year, d.month}; }

// Inclusive month count between two months (end >= start).
inline int months_between(YearMonth start, YearMonth end) noexcept {
  return end.index() - start.index() + 1;
}

// ISO-8601 "YYYY-MM-DD". Throws Error{parse} on malformed or impossible dates.
Date parse_date(std::string_view text);
// "YYYY-MM".
YearMonth parse_year_month(std::string_view text);

std::string to_string(const Date& d);
std::string to_string(const YearMonth& ym);

}  // namespace netshock
