#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "heliofield/errors.hpp"

namespace heliofield {

struct CivilDate {
  int year = 0;
  unsigned month = 0;  // 1..12
  unsigned day = 0;    // 1..31
};

/// Calendar date (UTC) of an epoch timestamp given in seconds.
inline CivilDate civil_from_utc(double utc_seconds) {
  using namespace std::chrono;
  const auto secs = static_cast<std::int64_t>(std::floor(utc_seconds));
  const sys_seconds tp{seconds{secs}};
  const auto dp = floor<days>(tp);
  const year_month_day ymd{dp};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day())};
}

/// Epoch seconds (UTC midnight) of a calendar date.
inline double utc_from_civil(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) {
    throw DataError("invalid calendar date " + std::to_string(year) + "-" +
                    std::to_string(month) + "-" + std::to_string(day));
  }
  const sys_days dp{ymd};
  return static_cast<double>(
      duration_cast<seconds>(dp.time_since_epoch()).count());
}

/// Parses "YYYY-MM-DD" into epoch seconds at UTC midnight.
inline double parse_utc_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  if (std::sscanf(text.c_str(), "%d%c%u%c%u", &y, &dash1, &m, &dash2, &d) != 5 ||
      dash1 != '-' || dash2 != '-') {
    throw DataError("cannot parse date '" + text + "', expected YYYY-MM-DD");
  }
  return utc_from_civil(y, m, d);
}

}  // namespace heliofield
