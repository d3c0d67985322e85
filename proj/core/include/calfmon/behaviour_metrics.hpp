#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "calfmon/labels.hpp"
#include "calfmon/time.hpp"

namespace calfmon::metrics {

struct TimelineEntry {
  Timestamp start;
  Timestamp end;
  Activity activity = Activity::inactive;
  Behaviour behaviour = Behaviour::other;

  friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

struct PredictionTimeline {
  std::string calf_id;
  std::vector<TimelineEntry> entries;
  std::string model1_version;
  std::string model2_version;
};

/// Throws Error(validation_failed) on overlapping or inverted entries.
void validate(const PredictionTimeline& tl);

/// Classified time in one span, kept in integer milliseconds so that splits at
/// hour boundaries conserve exactly.
struct Tally {
  std::int64_t active_ms = 0;
  std::int64_t inactive_ms = 0;
  std::array<std::int64_t, 4> behaviour_ms{};

  std::int64_t coverage_ms() const noexcept { return active_ms + inactive_ms; }
  Tally& operator+=(const Tally& o) noexcept;
};

struct MetricsBucket {
  Timestamp bucket_start;
  Tally tally;

  double active_s() const noexcept { return static_cast<double>(tally.active_ms) / 1000.0; }
  double inactive_s() const noexcept { return static_cast<double>(tally.inactive_ms) / 1000.0; }
  double coverage_s() const noexcept { return static_cast<double>(tally.coverage_ms()) / 1000.0; }
  double behaviour_s(Behaviour b) const noexcept {
    return static_cast<double>(tally.behaviour_ms[static_cast<std::size_t>(b)]) / 1000.0;
  }
};

/// One bucket per hour in [floor(from), ceil(to)), hours aligned to the local
/// clock given by `utc_offset_min`. Throws BadRange unless from < to.
std::vector<MetricsBucket> hourly_buckets(const PredictionTimeline& tl, Timestamp from, Timestamp to,
                                          int utc_offset_min = 0);

struct ActivityRatio {
  std::optional<double> proportion_active;
  std::optional<double> ratio;
};

ActivityRatio activity_ratio(const Tally& t) noexcept;

/// Null when nothing was classified.
std::optional<std::array<double, 4>> behaviour_proportions(const Tally& t) noexcept;

/// Classified time within [from, to).
Tally period_summary(const PredictionTimeline& tl, Timestamp from, Timestamp to);

struct DayNight {
  Tally day;
  Tally night;
};

/// Day is [06:00, 20:00) local time.
DayNight day_night_split(const PredictionTimeline& tl, Timestamp from, Timestamp to, int utc_offset_min = 0);

/// `start,end,activity,behaviour`.
void write_timeline_csv(const PredictionTimeline& tl, std::ostream& out);
PredictionTimeline read_timeline_csv(std::istream& in, std::string calf_id = {});

/// Metrics JSON. `granularity` is one of hour, summary, day_night.
std::string metrics_json(const PredictionTimeline& tl, Timestamp from, Timestamp to, const std::string& granularity,
                         int utc_offset_min = 0);

/// One `timestamp,activity,behaviour` row per 25 Hz sample of every entry
/// starting in [from, to).
void export_predictions_csv(const PredictionTimeline& tl, Timestamp from, Timestamp to, std::ostream& out,
                            double rate_hz = 25.0);

}  // namespace calfmon::metrics
