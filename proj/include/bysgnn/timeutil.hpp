#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bysgnn {

// Whole hours since 1970-01-01T00:00:00Z.
using HourStamp = std::int64_t;

// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional "Z" or "+00:00" suffix; a
// space may replace the 'T'. Minutes and seconds must be zero.
HourStamp parse_iso_hour(std::string_view text);
std::string format_iso_hour(HourStamp stamp);

// 0 = Monday ... 6 = Sunday.
int weekday(HourStamp stamp);
int hour_of_day(HourStamp stamp);

}  // namespace bysgnn
