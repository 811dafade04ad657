#include "bysgnn/timeutil.hpp"

#include <chrono>
#include <cstdio>

#include "bysgnn/error.hpp"

namespace bysgnn {

namespace {

int parse_int(std::string_view s, std::size_t pos, std::size_t len, std::string_view text) {
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (i >= s.size() || s[i] < '0' || s[i] > '9') throw ParseError("bad timestamp '" + std::string(text) + "'");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

HourStamp parse_iso_hour(std::string_view text) {
  std::string_view s = text;
  if (s.size() < 19) throw ParseError("bad timestamp '" + std::string(text) + "'");
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':') {
    throw ParseError("bad timestamp '" + std::string(text) + "'");
  }
  const std::string_view suffix = s.substr(19);
  if (!(suffix.empty() || suffix == "Z" || suffix == "+00:00")) {
    throw ParseError("timestamp must be UTC: '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  const int y = parse_int(s, 0, 4, text);
  const int mo = parse_int(s, 5, 2, text);
  const int d = parse_int(s, 8, 2, text);
  const int h = parse_int(s, 11, 2, text);
  const int mi = parse_int(s, 14, 2, text);
  const int se = parse_int(s, 17, 2, text);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23) throw ParseError("invalid calendar timestamp '" + std::string(text) + "'");
  if (mi != 0 || se != 0) throw ParseError("timestamp is not on the hour: '" + std::string(text) + "'");
  return static_cast<HourStamp>(sys_days{ymd}.time_since_epoch().count()) * 24 + h;
}

std::string format_iso_hour(HourStamp stamp) {
  using namespace std::chrono;
  const HourStamp days = (stamp >= 0 ? stamp : stamp - 23) / 24;
  const int hour = static_cast<int>(stamp - days * 24);
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00Z", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
  return buf;
}

int weekday(HourStamp stamp) {
  const HourStamp days = (stamp >= 0 ? stamp : stamp - 23) / 24;
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

int hour_of_day(HourStamp stamp) { return static_cast<int>(((stamp % 24) + 24) % 24); }

}  // namespace bysgnn
