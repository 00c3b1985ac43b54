#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "lagtrend/error.hpp"

namespace lagtrend {

using Duration = std::chrono::milliseconds;
using Instant = std::chrono::sys_time<Duration>;

namespace detail {

inline bool parse_fixed_int(std::string_view text, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > text.size()) return false;
  for (std::size_t i = pos; i < pos + width; ++i)
    if (text[i] < '0' || text[i] > '9') return false;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + width, out);
  return ec == std::errc{} && ptr == text.data() + pos + width;
}

}  // namespace detail

/// Parses `YYYY-MM-DDTHH:MM:SS[.fff][Z]` (a space may replace `T`). Fractions
/// shorter than three digits are scaled; longer ones are rejected. Returns
/// nullopt for anything else, including out-of-range calendar fields.
inline std::optional<Instant> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (text.size() < 19) return std::nullopt;
  if (!detail::parse_fixed_int(text, 0, 4, y) || text[4] != '-' ||
      !detail::parse_fixed_int(text, 5, 2, mo) || text[7] != '-' ||
      !detail::parse_fixed_int(text, 8, 2, d) || (text[10] != 'T' && text[10] != ' ') ||
      !detail::parse_fixed_int(text, 11, 2, h) || text[13] != ':' ||
      !detail::parse_fixed_int(text, 14, 2, mi) || text[16] != ':' ||
      !detail::parse_fixed_int(text, 17, 2, s))
    return std::nullopt;
  int millis = 0;
  if (text.size() > 19) {
    if (text[19] != '.') return std::nullopt;
    const std::size_t digits = text.size() - 20;
    if (digits == 0 || digits > 3 || !detail::parse_fixed_int(text, 20, digits, millis))
      return std::nullopt;
    for (std::size_t i = digits; i < 3; ++i) millis *= 10;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return Instant{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{s} +
                 milliseconds{millis}};
}

inline Instant parse_timestamp_or_throw(std::string_view text) {
  auto parsed = parse_timestamp(text);
  if (!parsed) throw ConfigError("invalid timestamp '" + std::string(text) + "'");
  return *parsed;
}

/// ISO-8601 UTC with millisecond precision, e.g. `2011-04-01T09:30:00.000Z`.
inline std::string format_timestamp(Instant t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss<milliseconds> tod{t - day_start};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return buf;
}

/// Parses durations such as `500ms`, `30s`, `1min`, `30min`, `1h`, `1d`.
inline Duration parse_duration(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || value <= 0) throw ConfigError("invalid duration '" + std::string(text) + "'");
  const std::string_view unit(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
  if (unit == "ms") return Duration{value};
  if (unit == "s") return std::chrono::seconds{value};
  if (unit == "min" || unit == "m") return std::chrono::minutes{value};
  if (unit == "h") return std::chrono::hours{value};
  if (unit == "d") return std::chrono::days{value};
  throw ConfigError("unknown duration unit in '" + std::string(text) + "'");
}

}  // namespace lagtrend
