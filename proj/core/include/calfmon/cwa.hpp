#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calfmon/recording.hpp"

// CWA container (OpenMovement layout).
//
//   header block, 1024 bytes, tag "MD", packet length 1020
//     @5  u16 device id      @7  u32 session id
//     @13 u32 logging start  @17 u32 logging end   (packed date-times)
//     @36 u8  rate code      @41 u8  firmware revision
//   data blocks, 512 bytes, tag "AX", packet length 508
//     @4  u16 fractional second (bit 15 set, 15-bit fraction)
//     @6  u32 session id     @10 u32 sequence id
//     @14 u32 packed date-time of the block
//     @24 u8  rate code      @25 u8  axes/packing (0x32 unpacked, 0x30 packed)
//     @26 i16 timestamp offset (sample index the time refers to)
//     @28 u16 sample count   @30 payload (480 bytes)
//     @510 u16 checksum: the 256 little-endian words of the block sum to 0
//
// Packed date-time, MSB first: 6 bits year-2000, 4 month, 5 day, 5 hour,
// 6 minute, 6 second.
namespace calfmon::cwa {

enum class Packing : std::uint8_t { unpacked, packed };

inline constexpr std::size_t kHeaderSize = 1024;
inline constexpr std::size_t kBlockSize = 512;
inline constexpr std::size_t kPayloadSize = 480;
inline constexpr std::uint8_t kModeUnpacked = 0x32;
inline constexpr std::uint8_t kModePacked = 0x30;

constexpr std::size_t samples_per_block(Packing p) noexcept {
  return p == Packing::unpacked ? kPayloadSize / 6 : kPayloadSize / 4;
}

/// Smallest representable step in g: 1/256 for unpacked, (1 << exponent)/256
/// for a packed word.
inline constexpr double kUnitG = 1.0 / 256.0;

Recording parse_cwa(std::span<const std::uint8_t> bytes);
Recording parse_cwa(std::istream& in);
Recording parse_cwa_file(const std::string& path);

std::vector<std::uint8_t> write_cwa(const Recording& rec, Packing mode);

/// 16-bit little-endian word sum of a block; valid blocks sum to zero.
std::uint16_t word_sum(std::span<const std::uint8_t> block) noexcept;

std::uint32_t pack_datetime(std::int64_t epoch_seconds);
std::int64_t unpack_datetime(std::uint32_t packed);

double rate_from_code(std::uint8_t code) noexcept;
double range_from_code(std::uint8_t code) noexcept;
/// Rate code for `rate_hz` (must be 3200 / 2^k) and range in {2,4,8,16} g.
std::uint8_t make_rate_code(double rate_hz, double range_g);

}  // namespace calfmon::cwa

namespace calfmon::csv {

/// `timestamp,x,y,z` with ISO-8601 UTC timestamps. Throws BadHeader or
/// BadRow carrying the 1-based file line of the first malformed row.
Recording parse_csv(std::istream& in);
Recording parse_csv(std::string_view text);

void write_csv(const Recording& rec, std::ostream& out);
std::string write_csv(const Recording& rec);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace calfmon::csv

namespace calfmon {

inline constexpr double kGapThresholdSeconds = 5.0;

/// Nearest-neighbour resampling onto a uniform grid from the first to the last
/// timestamp. Grid points inside input gaps longer than 5 s are dropped and
/// split the output into segments. Throws TooShort below two samples.
Recording regularize(const Recording& rec, double target_hz = 25.0);

}  // namespace calfmon
