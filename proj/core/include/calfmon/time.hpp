#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace calfmon {

using Millis = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Millis>;

/// Milliseconds since the Unix epoch.
inline std::int64_t to_epoch_ms(Timestamp t) noexcept { return t.time_since_epoch().count(); }
inline Timestamp from_epoch_ms(std::int64_t ms) noexcept { return Timestamp{Millis{ms}}; }

/// Parses `YYYY-MM-DDTHH:MM:SS[.fff][Z|+hh:mm|-hh:mm]` (a space is accepted in
/// place of `T`). Fractions beyond milliseconds are rounded. Throws
/// Error(parse_failed) on malformed input.
Timestamp parse_iso8601(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
std::string format_iso8601(Timestamp t);

/// Parses `+hh:mm`, `-hh:mm`, `Z` or a signed minute count into minutes.
int parse_utc_offset(std::string_view text);
std::string format_utc_offset(int minutes);

Timestamp floor_hour(Timestamp t) noexcept;
Timestamp ceil_hour(Timestamp t) noexcept;

}  // namespace calfmon
