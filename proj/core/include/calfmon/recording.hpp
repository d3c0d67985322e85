#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calfmon/time.hpp"

namespace calfmon {

/// One tri-axial reading in g.
struct Sample {
  Timestamp t;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Source : std::uint8_t { cwa, csv };

struct DeviceMeta {
  std::uint16_t device_id = 0;
  std::uint32_t session_id = 0;
  double range_g = 8.0;
  /// Device rate code: low nibble encodes the rate, top two bits the range.
  std::uint8_t rate_code = 0x48;
};

/// Half-open index range [begin, end) of gap-free samples.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Recording {
  std::vector<Sample> samples;
  double rate_hz = 25.0;
  DeviceMeta device;
  Source source = Source::cwa;
  /// Gap-free runs. Empty means the whole sample vector is one run.
  std::vector<Segment> segments;
  /// Data blocks dropped for a bad checksum or malformed framing.
  std::size_t rejected_blocks = 0;
  /// Blocks with a tag other than a data block (skipped without decoding).
  std::size_t skipped_blocks = 0;
};

/// Runs of `rec`, defaulting to a single run over all samples.
std::vector<Segment> segments_of(const Recording& rec);

}  // namespace calfmon
