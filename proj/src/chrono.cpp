#include "arena/chrono.hpp"

#include <cstdio>

#include "arena/error.hpp"

namespace arena {
namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  int value = 0;
  if (pos + len > text.size()) fail(ErrorCode::ValidationFailed, "bad timestamp: " + std::string(whole));
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (text[i] < '0' || text[i] > '9') {
      fail(ErrorCode::ValidationFailed, "bad timestamp: " + std::string(whole));
    }
    value = value * 10 + (text[i] - '0');
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    fail(ErrorCode::ValidationFailed, "bad timestamp: " + std::string(text));
  }
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10) fail(ErrorCode::ValidationFailed, "bad date: " + std::string(text));
  const int y = read_int(text, 0, 4, text);
  expect(text, 4, '-');
  const int m = read_int(text, 5, 2, text);
  expect(text, 7, '-');
  const int d = read_int(text, 8, 2, text);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) fail(ErrorCode::ValidationFailed, "bad date: " + std::string(text));
  return Date{ymd};
}

std::chrono::seconds parse_time_of_day(std::string_view text) {
  if (text.size() != 8) fail(ErrorCode::ValidationFailed, "bad time of day: " + std::string(text));
  const int h = read_int(text, 0, 2, text);
  expect(text, 2, ':');
  const int mi = read_int(text, 3, 2, text);
  expect(text, 5, ':');
  const int s = read_int(text, 6, 2, text);
  if (h > 23 || mi > 59 || s > 60) fail(ErrorCode::ValidationFailed, "bad time of day: " + std::string(text));
  return std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

Instant parse_instant(std::string_view text) {
  if (text.size() != 20 || text[10] != 'T' || text[19] != 'Z') {
    fail(ErrorCode::ValidationFailed, "bad timestamp (want YYYY-MM-DDTHH:MM:SSZ): " + std::string(text));
  }
  return at_time(parse_date(text.substr(0, 10)), parse_time_of_day(text.substr(11, 8)));
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_time_of_day(std::chrono::seconds tod) {
  const auto total = tod.count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(total / 3600),
                static_cast<long long>((total / 60) % 60), static_cast<long long>(total % 60));
  return buf;
}

std::string format_instant(Instant instant) {
  const Date date = date_of(instant);
  return format_date(date) + "T" + format_time_of_day(instant - Instant{date}) + "Z";
}

bool is_weekend(Date date) {
  const std::chrono::weekday wd{date};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

Instant now_utc() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

}  // namespace arena
