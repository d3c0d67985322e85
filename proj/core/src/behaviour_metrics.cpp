#include "calfmon/behaviour_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "calfmon/error.hpp"
#include "calfmon/json_util.hpp"

namespace calfmon::metrics {

using json = nlohmann::ordered_json;

namespace {

constexpr std::int64_t kHourMs = 3'600'000;
constexpr std::int64_t kDayMs = 24 * kHourMs;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void add(Tally& t, const TimelineEntry& e, std::int64_t ms) {
  if (ms <= 0) return;
  if (e.activity == Activity::active) {
    t.active_ms += ms;
  } else {
    t.inactive_ms += ms;
  }
  t.behaviour_ms[static_cast<std::size_t>(e.behaviour)] += ms;
}

void check_range(Timestamp from, Timestamp to) {
  if (!(from < to)) throw Error(Errc::bad_range, "range start must precede its end");
}

json tally_json(const Tally& t) {
  json j;
  j["coverage_s"] = round_sig(static_cast<double>(t.coverage_ms()) / 1000.0);
  j["active_s"] = round_sig(static_cast<double>(t.active_ms) / 1000.0);
  j["inactive_s"] = round_sig(static_cast<double>(t.inactive_ms) / 1000.0);
  const auto r = activity_ratio(t);
  j["proportion_active"] = r.proportion_active ? json(round_sig(*r.proportion_active)) : json(nullptr);
  j["ratio_active_inactive"] = r.ratio ? json(round_sig(*r.ratio)) : json(nullptr);
  const auto p = behaviour_proportions(t);
  if (p) {
    json props;
    for (Behaviour b : kBehaviours) props[std::string(to_string(b))] = round_sig((*p)[static_cast<std::size_t>(b)]);
    j["proportions"] = props;
  } else {
    j["proportions"] = nullptr;
  }
  return j;
}

}  // namespace

Tally& Tally::operator+=(const Tally& o) noexcept {
  active_ms += o.active_ms;
  inactive_ms += o.inactive_ms;
  for (std::size_t i = 0; i < behaviour_ms.size(); ++i) behaviour_ms[i] += o.behaviour_ms[i];
  return *this;
}

void validate(const PredictionTimeline& tl) {
  std::vector<TimelineEntry> sorted = tl.entries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i].start < sorted[i].end)) throw Error(Errc::validation_failed, "timeline entry ends before it starts");
    if (i > 0 && sorted[i].start < sorted[i - 1].end) throw Error(Errc::validation_failed, "timeline entries overlap");
  }
}

std::vector<MetricsBucket> hourly_buckets(const PredictionTimeline& tl, Timestamp from, Timestamp to,
                                          int utc_offset_min) {
  check_range(from, to);
  const std::int64_t offset = static_cast<std::int64_t>(utc_offset_min) * 60'000;
  const std::int64_t first = floor_div(to_epoch_ms(from) + offset, kHourMs) * kHourMs - offset;
  const std::int64_t last = -floor_div(-(to_epoch_ms(to) + offset), kHourMs) * kHourMs - offset;
  const auto n = static_cast<std::size_t>((last - first) / kHourMs);
  std::vector<MetricsBucket> buckets(n);
  for (std::size_t h = 0; h < n; ++h) buckets[h].bucket_start = from_epoch_ms(first + static_cast<std::int64_t>(h) * kHourMs);

  for (const auto& e : tl.entries) {
    std::int64_t s = std::max(to_epoch_ms(e.start), first);
    const std::int64_t end = std::min(to_epoch_ms(e.end), last);
    while (s < end) {
      const std::int64_t h = (s - first) / kHourMs;
      const std::int64_t boundary = first + (h + 1) * kHourMs;
      const std::int64_t piece_end = std::min(end, boundary);
      add(buckets[static_cast<std::size_t>(h)].tally, e, piece_end - s);
      s = piece_end;
    }
  }
  return buckets;
}

ActivityRatio activity_ratio(const Tally& t) noexcept {
  ActivityRatio r;
  if (t.coverage_ms() > 0) {
    r.proportion_active = static_cast<double>(t.active_ms) / static_cast<double>(t.coverage_ms());
  }
  if (t.inactive_ms > 0) r.ratio = static_cast<double>(t.active_ms) / static_cast<double>(t.inactive_ms);
  return r;
}

std::optional<std::array<double, 4>> behaviour_proportions(const Tally& t) noexcept {
  const std::int64_t total = t.coverage_ms();
  if (total <= 0) return std::nullopt;
  std::array<double, 4> p{};
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<double>(t.behaviour_ms[i]) / static_cast<double>(total);
  }
  return p;
}

Tally period_summary(const PredictionTimeline& tl, Timestamp from, Timestamp to) {
  check_range(from, to);
  Tally t;
  for (const auto& e : tl.entries) {
    const std::int64_t s = std::max(to_epoch_ms(e.start), to_epoch_ms(from));
    const std::int64_t end = std::min(to_epoch_ms(e.end), to_epoch_ms(to));
    add(t, e, end - s);
  }
  return t;
}

DayNight day_night_split(const PredictionTimeline& tl, Timestamp from, Timestamp to, int utc_offset_min) {
  check_range(from, to);
  const std::int64_t offset = static_cast<std::int64_t>(utc_offset_min) * 60'000;
  constexpr std::int64_t kDayStart = 6 * kHourMs;
  constexpr std::int64_t kNightStart = 20 * kHourMs;
  DayNight out;
  for (const auto& e : tl.entries) {
    // Work in local milliseconds and cut at every 06:00 / 20:00 boundary.
    std::int64_t s = std::max(to_epoch_ms(e.start), to_epoch_ms(from)) + offset;
    const std::int64_t end = std::min(to_epoch_ms(e.end), to_epoch_ms(to)) + offset;
    while (s < end) {
      const std::int64_t day0 = floor_div(s, kDayMs) * kDayMs;
      const std::int64_t tod = s - day0;
      std::int64_t boundary = 0;
      bool is_day = false;
      if (tod < kDayStart) {
        boundary = day0 + kDayStart;
      } else if (tod < kNightStart) {
        boundary = day0 + kNightStart;
        is_day = true;
      } else {
        boundary = day0 + kDayMs + kDayStart;
      }
      const std::int64_t piece_end = std::min(end, boundary);
      add(is_day ? out.day : out.night, e, piece_end - s);
      s = piece_end;
    }
  }
  return out;
}

void write_timeline_csv(const PredictionTimeline& tl, std::ostream& out) {
  out << "start,end,activity,behaviour\n";
  for (const auto& e : tl.entries) {
    out << format_iso8601(e.start) << ',' << format_iso8601(e.end) << ',' << to_string(e.activity) << ','
        << to_string(e.behaviour) << '\n';
  }
}

PredictionTimeline read_timeline_csv(std::istream& in, std::string calf_id) {
  PredictionTimeline tl;
  tl.calf_id = std::move(calf_id);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(Errc::bad_header, "timeline file is empty");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "start,end,activity,behaviour") throw Error(Errc::bad_header, "expected header start,end,activity,behaviour");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw Error(Errc::bad_row, "expected 4 columns", line_no);
    TimelineEntry e;
    try {
      e.start = parse_iso8601(cells[0]);
      e.end = parse_iso8601(cells[1]);
    } catch (const Error&) {
      throw Error(Errc::bad_row, "bad timestamp", line_no);
    }
    const auto a = parse_activity(cells[2]);
    const auto b = parse_behaviour(cells[3]);
    if (!a || !b) throw Error(Errc::bad_row, "unknown label", line_no);
    e.activity = *a;
    e.behaviour = *b;
    tl.entries.push_back(e);
  }
  validate(tl);
  return tl;
}

std::string metrics_json(const PredictionTimeline& tl, Timestamp from, Timestamp to, const std::string& granularity,
                         int utc_offset_min) {
  json j;
  j["calf_id"] = tl.calf_id;
  j["granularity"] = granularity;
  j["from"] = format_iso8601(from);
  j["to"] = format_iso8601(to);
  j["utc_offset"] = format_utc_offset(utc_offset_min);
  if (granularity == "hour") {
    json buckets = json::array();
    for (const auto& b : hourly_buckets(tl, from, to, utc_offset_min)) {
      json e;
      e["bucket_start"] = format_iso8601(b.bucket_start);
      e.update(tally_json(b.tally));
      buckets.push_back(e);
    }
    j["buckets"] = buckets;
  } else if (granularity == "summary") {
    json e;
    e["bucket_start"] = format_iso8601(from);
    e.update(tally_json(period_summary(tl, from, to)));
    j["summary"] = e;
  } else if (granularity == "day_night") {
    const auto dn = day_night_split(tl, from, to, utc_offset_min);
    j["day"] = tally_json(dn.day);
    j["night"] = tally_json(dn.night);
  } else {
    throw Error(Errc::bad_config, "granularity must be hour, summary or day_night");
  }
  return j.dump(2);
}

void export_predictions_csv(const PredictionTimeline& tl, Timestamp from, Timestamp to, std::ostream& out,
                            double rate_hz) {
  check_range(from, to);
  const double step_ms = 1000.0 / rate_hz;
  std::vector<const TimelineEntry*> rows;
  for (const auto& e : tl.entries) {
    if (e.start >= from && e.start < to) rows.push_back(&e);
  }
  std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->start < b->start; });
  out << "timestamp,activity,behaviour\n";
  for (const auto* e : rows) {
    const auto span = static_cast<double>(to_epoch_ms(e->end) - to_epoch_ms(e->start));
    const auto n = static_cast<std::int64_t>(std::llround(span / step_ms));
    const std::string_view a = to_string(e->activity);
    const std::string_view b = to_string(e->behaviour);
    for (std::int64_t i = 0; i < n; ++i) {
      const auto t = e->start + Millis{std::llround(static_cast<double>(i) * step_ms)};
      out << format_iso8601(t) << ',' << a << ',' << b << '\n';
    }
  }
}

}  // namespace calfmon::metrics
