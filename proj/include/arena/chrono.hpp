#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace arena {

using Date = std::chrono::sys_days;
using Instant = std::chrono::sys_seconds;

// ISO-8601: dates as YYYY-MM-DD, instants as YYYY-MM-DDTHH:MM:SSZ (UTC only).
Date parse_date(std::string_view text);
Instant parse_instant(std::string_view text);
std::string format_date(Date date);
std::string format_instant(Instant instant);

/// Time of day in UTC, "HH:MM:SS".
std::chrono::seconds parse_time_of_day(std::string_view text);
std::string format_time_of_day(std::chrono::seconds tod);

inline Instant at_time(Date date, std::chrono::seconds tod) { return Instant{date} + tod; }
inline Date date_of(Instant instant) { return std::chrono::floor<std::chrono::days>(instant); }

bool is_weekend(Date date);

Instant now_utc();

}  // namespace arena
