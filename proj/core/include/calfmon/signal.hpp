#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calfmon/labels.hpp"
#include "calfmon/recording.hpp"
#include "calfmon/time.hpp"

namespace calfmon::signal {

inline constexpr std::size_t kChannels = 8;
inline constexpr std::size_t kWindowLength = 75;  // 3 s at 25 Hz
inline constexpr std::size_t kTrainingStride = 37;
inline constexpr std::size_t kInferenceStride = kWindowLength;
inline constexpr std::size_t kStaticSpan = 75;

enum class Channel : std::uint8_t { x, y, z, magnitude, odba, vedba, pitch, roll };

inline constexpr std::array<std::string_view, kChannels> kChannelNames{
    "x", "y", "z", "magnitude", "odba", "vedba", "pitch", "roll"};

/// Raw axes plus the five derived series on the recording's time grid.
struct DerivedSeries {
  std::vector<Timestamp> t;
  std::array<std::vector<double>, kChannels> channels;
  std::vector<Segment> segments;
  double rate_hz = 25.0;

  std::size_t size() const noexcept { return t.size(); }
  const std::vector<double>& operator[](Channel c) const { return channels[static_cast<std::size_t>(c)]; }
};

/// 8 x 75 samples stored channel-major.
struct Window {
  Timestamp start_t;
  std::string calf_id;
  std::array<double, kChannels * kWindowLength> values{};

  std::span<const double, kWindowLength> channel(std::size_t c) const {
    return std::span<const double, kWindowLength>(values.data() + c * kWindowLength, kWindowLength);
  }
  std::span<double, kWindowLength> channel(std::size_t c) {
    return std::span<double, kWindowLength>(values.data() + c * kWindowLength, kWindowLength);
  }
};

struct LabeledWindow {
  Window window;
  Behaviour behaviour = Behaviour::other;
  Activity activity = Activity::inactive;
};

struct EthogramInterval {
  std::string calf_id;
  Timestamp start;
  Timestamp end;
  std::string label;
  Activity activity = Activity::inactive;
};

/// Observed behaviour intervals, possibly for several calves.
struct Ethogram {
  std::vector<EthogramInterval> intervals;

  /// Intervals of one calf, ordered by start.
  std::vector<EthogramInterval> for_calf(std::string_view calf_id) const;
};

/// Throws Error(validation_failed) when a calf has overlapping or empty
/// intervals.
void validate(const Ethogram& eth);

/// `calf_id,start,end,behaviour,activity`, ISO-8601 timestamps.
Ethogram read_ethogram_csv(std::istream& in);
void write_ethogram_csv(const Ethogram& eth, std::ostream& out);

enum class Purpose : std::uint8_t { training, inference };

/// Throws TooShort below one window of samples.
DerivedSeries derive_channels(const Recording& rec);

/// Windows never straddle a segment boundary.
std::vector<Window> segment(const DerivedSeries& ds, Purpose purpose, std::string_view calf_id = {});

/// Window start offsets (in samples) within one gap-free run of `length`.
std::vector<std::size_t> window_starts(std::size_t length, Purpose purpose);

/// Labels windows fully covered by one interval of their calf; others are
/// dropped.
std::vector<LabeledWindow> align_labels(std::span<const Window> windows, const Ethogram& eth);

/// Window span in milliseconds at 25 Hz.
inline constexpr Millis kWindowDuration{3000};

}  // namespace calfmon::signal
