// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <stdexcept>
#include <string>

namespace rpmesh {

// All timestamps in the system are UTC with millisecond resolution. Simulated
// runs use the same types on a virtual clock, so everything downstream of a
// TimePoint is agnostic to whether time is real.
using Duration = std::chrono::milliseconds;
using TimePoint = std::chrono::time_point<std::chrono::system_clock, Duration>;

// Raised by every parser in the library when input is rejected.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

constexpr Duration msec(std::int64_t v) { return Duration(v); }
constexpr Duration sec(std::int64_t v) { return Duration(v * 1000); }
constexpr Duration minutes(std::int64_t v) { return sec(v * 60); }
constexpr Duration hours(std::int64_t v) { return sec(v * 3600); }

// Base instant for simulated clusters: 2025-01-01T00:00:00Z. Any fixed value
// would do; a real date keeps serialized timestamps readable.
inline constexpr TimePoint kSimEpoch{Duration(1735689600000LL)};

inline TimePoint wall_now() {
  return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now());
}

// "2026-08-22T07:15:00Z", with a ".mmm" fraction only when non-zero.
inline std::string format_rfc3339(TimePoint t) {
  const std::int64_t total_ms = t.time_since_epoch().count();
  std::int64_t secs = total_ms / 1000;
  std::int64_t frac = total_ms % 1000;
  if (frac < 0) {  // pre-epoch instants round toward minus infinity
    secs -= 1;
    frac += 1000;
  }
  std::time_t tt = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[80];
  if (frac != 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec, static_cast<int>(frac));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec);
  }
  return buf;
}

inline TimePoint parse_rfc3339(const std::string& s) {
  int y, mo, d, h, mi, se, ms = 0;
  int n = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi,
                  &se, &n) != 6) {
    throw ParseError("bad timestamp: " + s);
  }
  std::string rest = s.substr(static_cast<std::size_t>(n));
  if (!rest.empty() && rest[0] == '.') {
    int n2 = 0;
    if (std::sscanf(rest.c_str(), ".%3d%n", &ms, &n2) != 1 || n2 != 4) {
      throw ParseError("bad timestamp fraction: " + s);
    }
    rest = rest.substr(static_cast<std::size_t>(n2));
  }
  if (rest != "Z") throw ParseError("timestamp must be UTC ('Z'): " + s);
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60) {
    throw ParseError("timestamp out of range: " + s);
  }
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = se;
  std::time_t tt = timegm(&tm);
  return TimePoint(Duration(static_cast<std::int64_t>(tt) * 1000 + ms));
}

// Durations in config and scenario files: integer plus unit suffix (ms, s, m,
// h, d); a bare integer means seconds.
inline Duration parse_duration(const std::string& s) {
  if (s.empty()) throw ParseError("empty duration");
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ParseError("bad duration: " + s);
  }
  if (v < 0) throw ParseError("negative duration: " + s);
  const std::string unit = s.substr(pos);
  if (unit == "ms") return msec(v);
  if (unit == "s" || unit.empty()) return sec(v);
  if (unit == "m") return minutes(v);
  if (unit == "h") return hours(v);
  if (unit == "d") return hours(v * 24);
  throw ParseError("unknown duration unit '" + unit + "' in: " + s);
}

inline std::string format_duration(Duration d) {
  const std::int64_t ms = d.count();
  if (ms % 1000 != 0) return std::to_string(ms) + "ms";
  const std::int64_t s = ms / 1000;
  if (s % 3600 == 0 && s != 0) return std::to_string(s / 3600) + "h";
  if (s % 60 == 0 && s != 0) return std::to_string(s / 60) + "m";
  return std::to_string(s) + "s";
}

}  // namespace rpmesh
