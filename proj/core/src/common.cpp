#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

#include "calfmon/error.hpp"
#include "calfmon/labels.hpp"
#include "calfmon/random.hpp"
#include "calfmon/time.hpp"

namespace calfmon {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_header: return "MalformedHeader";
    case Errc::empty_recording: return "EmptyRecording";
    case Errc::unsupported_mode: return "UnsupportedMode";
    case Errc::bad_header: return "BadHeader";
    case Errc::bad_row: return "BadRow";
    case Errc::range_exceeded: return "RangeExceeded";
    case Errc::too_short: return "TooShort";
    case Errc::degenerate_labels: return "DegenerateLabels";
    case Errc::bad_config: return "BadConfig";
    case Errc::no_valid_positions: return "NoValidPositions";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::singular_input: return "SingularInput";
    case Errc::bad_magic: return "BadMagic";
    case Errc::version_unsupported: return "VersionUnsupported";
    case Errc::truncated: return "Truncated";
    case Errc::too_few_groups: return "TooFewGroups";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::empty_class_row: return "EmptyClassRow";
    case Errc::bad_range: return "BadRange";
    case Errc::bad_profile: return "BadProfile";
    case Errc::validation_failed: return "ValidationFailed";
    case Errc::unknown_calf: return "UnknownCalf";
    case Errc::parse_failed: return "ParseFailed";
    case Errc::model_missing: return "ModelMissing";
    case Errc::recording_missing: return "RecordingMissing";
    case Errc::no_data: return "NoData";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

// --- labels ---------------------------------------------------------------

std::string_view to_string(Behaviour b) noexcept {
  switch (b) {
    case Behaviour::lying: return "lying";
    case Behaviour::running: return "running";
    case Behaviour::drinking_milk: return "drinking_milk";
    case Behaviour::other: return "other";
  }
  return "other";
}

std::string_view to_string(Activity a) noexcept {
  return a == Activity::active ? "active" : "inactive";
}

std::optional<Behaviour> parse_behaviour(std::string_view name) noexcept {
  for (auto b : kBehaviours) {
    if (to_string(b) == name) return b;
  }
  return std::nullopt;
}

std::optional<Activity> parse_activity(std::string_view name) noexcept {
  if (name == "active") return Activity::active;
  if (name == "inactive") return Activity::inactive;
  return std::nullopt;
}

Behaviour behaviour_from_label(std::string_view label) noexcept {
  if (label == "lying") return Behaviour::lying;
  if (label == "running") return Behaviour::running;
  if (label == "drinking_milk" || label == "drinking milk") return Behaviour::drinking_milk;
  return Behaviour::other;
}

std::optional<Activity> implied_activity(Behaviour b) noexcept {
  switch (b) {
    case Behaviour::lying: return Activity::inactive;
    case Behaviour::running:
    case Behaviour::drinking_milk: return Activity::active;
    case Behaviour::other: return std::nullopt;
  }
  return std::nullopt;
}

// --- random ---------------------------------------------------------------

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw Error(Errc::bad_config, "uniform_int over an empty range");
  // Largest multiple of n representable; draws at or above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return v % n;
}

double Rng::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// --- time -----------------------------------------------------------------

namespace {

[[noreturn]] void bad_time(std::string_view text) {
  throw Error(Errc::parse_failed, "bad timestamp '" + std::string(text) + "'");
}

int read_int(std::string_view text, std::size_t& pos, std::size_t digits, std::string_view whole) {
  if (pos + digits > text.size()) bad_time(whole);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + digits, value);
  if (ec != std::errc{} || ptr != text.data() + pos + digits) bad_time(whole);
  pos += digits;
  return value;
}

void expect(std::string_view text, std::size_t& pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c) bad_time(whole);
  ++pos;
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  std::size_t pos = 0;
  const int yr = read_int(text, pos, 4, text);
  expect(text, pos, '-', text);
  const int mo = read_int(text, pos, 2, text);
  expect(text, pos, '-', text);
  const int dy = read_int(text, pos, 2, text);
  if (pos >= text.size() || (text[pos] != 'T' && text[pos] != ' ')) bad_time(text);
  ++pos;
  const int hh = read_int(text, pos, 2, text);
  expect(text, pos, ':', text);
  const int mm = read_int(text, pos, 2, text);
  expect(text, pos, ':', text);
  const int ss = read_int(text, pos, 2, text);

  const year_month_day ymd{year{yr}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(dy)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) bad_time(text);

  std::int64_t frac_ms = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == start) bad_time(text);
    // Scale the fraction to milliseconds with round-half-up on the 4th digit.
    double frac = 0.0;
    double scale = 0.1;
    for (std::size_t i = start; i < pos; ++i, scale *= 0.1) frac += (text[i] - '0') * scale;
    frac_ms = static_cast<std::int64_t>(std::floor(frac * 1000.0 + 0.5));
  }

  int offset_min = 0;
  if (pos < text.size()) {
    offset_min = parse_utc_offset(text.substr(pos));
  }

  const auto t = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} + milliseconds{frac_ms} -
                 minutes{offset_min};
  return time_point_cast<Millis>(t);
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss<Millis> tod{t - day_start};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()), static_cast<int>(tod.subseconds().count()));
  return buf;
}

int parse_utc_offset(std::string_view text) {
  if (text == "Z" || text == "z" || text.empty()) return 0;
  if (text[0] != '+' && text[0] != '-') {
    int minutes = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), minutes);
    if (ec != std::errc{} || ptr != text.data() + text.size()) bad_time(text);
    return minutes;
  }
  const int sign = text[0] == '-' ? -1 : 1;
  std::size_t pos = 1;
  const int hh = read_int(text, pos, 2, text);
  if (pos < text.size() && text[pos] == ':') ++pos;
  const int mm = read_int(text, pos, 2, text);
  if (pos != text.size() || hh > 23 || mm > 59) bad_time(text);
  return sign * (hh * 60 + mm);
}

std::string format_utc_offset(int minutes) {
  char buf[16];
  const int a = minutes < 0 ? -minutes : minutes;
  std::snprintf(buf, sizeof buf, "%c%02d:%02d", minutes < 0 ? '-' : '+', a / 60, a % 60);
  return buf;
}

Timestamp floor_hour(Timestamp t) noexcept {
  return std::chrono::floor<std::chrono::hours>(t);
}

Timestamp ceil_hour(Timestamp t) noexcept {
  return std::chrono::ceil<std::chrono::hours>(t);
}

}  // namespace calfmon
