#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "calfmon/cwa.hpp"
#include "calfmon/error.hpp"
#include "test_support.hpp"

namespace calfmon {
namespace {

using testing::random_recording;

std::uint16_t le16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

// Independent checksum: plain 32-bit accumulation of the 256 words.
std::uint32_t sum_words(const std::vector<std::uint8_t>& b, std::size_t off) {
  std::uint32_t s = 0;
  for (std::size_t i = 0; i < cwa::kBlockSize; i += 2) s += le16(b, off + i);
  return s & 0xffffu;
}

void fix_checksum(std::vector<std::uint8_t>& b, std::size_t off) {
  b[off + 510] = 0;
  b[off + 511] = 0;
  const std::uint32_t s = sum_words(b, off);
  const std::uint16_t c = static_cast<std::uint16_t>((0x10000u - s) & 0xffffu);
  b[off + 510] = static_cast<std::uint8_t>(c & 0xff);
  b[off + 511] = static_cast<std::uint8_t>(c >> 8);
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io_error;
}

TEST(Cwa, UnpackedRoundTripIsExact) {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto rec = random_recording(rng, 1 + rng.uniform_int(700), 7.9);
    const auto parsed = cwa::parse_cwa(cwa::write_cwa(rec, cwa::Packing::unpacked));
    ASSERT_EQ(parsed.samples.size(), rec.samples.size());
    EXPECT_EQ(parsed.samples, rec.samples);
    EXPECT_EQ(parsed.device.device_id, rec.device.device_id);
    EXPECT_EQ(parsed.device.session_id, rec.device.session_id);
    EXPECT_EQ(parsed.rate_hz, 25.0);
    EXPECT_EQ(parsed.device.range_g, 8.0);
    EXPECT_EQ(parsed.rejected_blocks, 0u);
  }
}

TEST(Cwa, PackedRoundTripWithinOneStep) {
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    auto rec = random_recording(rng, 1 + rng.uniform_int(500), 1.0);
    for (auto& s : rec.samples) {
      const double scale = std::pow(2.0, static_cast<double>(rng.uniform_int(4)));
      s.x = rng.uniform(-1.99, 1.99) * scale;
      s.y = rng.uniform(-1.99, 1.99) * scale;
      s.z = rng.uniform(-1.99, 1.99) * scale;
    }
    const auto parsed = cwa::parse_cwa(cwa::write_cwa(rec, cwa::Packing::packed));
    ASSERT_EQ(parsed.samples.size(), rec.samples.size());
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
      const auto& a = rec.samples[i];
      const auto& b = parsed.samples[i];
      // Step of the shared 2-bit exponent a 10-bit signed field needs.
      const double peak = std::max({std::abs(a.x), std::abs(a.y), std::abs(a.z)}) * 256.0;
      int e = 0;
      while (e < 3 && peak > 511.0 * std::pow(2.0, e)) ++e;
      const double step = std::pow(2.0, e) / 256.0;
      EXPECT_EQ(a.t, b.t);
      EXPECT_LE(std::abs(a.x - b.x), step);
      EXPECT_LE(std::abs(a.y - b.y), step);
      EXPECT_LE(std::abs(a.z - b.z), step);
    }
  }
}

TEST(Cwa, EveryBlockChecksumsToZero) {
  Rng rng(13);
  for (auto mode : {cwa::Packing::unpacked, cwa::Packing::packed}) {
    const auto bytes = cwa::write_cwa(random_recording(rng, 1000), mode);
    ASSERT_EQ((bytes.size() - cwa::kHeaderSize) % cwa::kBlockSize, 0u);
    const std::size_t per = cwa::samples_per_block(mode);
    EXPECT_EQ((bytes.size() - cwa::kHeaderSize) / cwa::kBlockSize, (1000 + per - 1) / per);
    for (std::size_t off = cwa::kHeaderSize; off < bytes.size(); off += cwa::kBlockSize) {
      EXPECT_EQ(sum_words(bytes, off), 0u);
      EXPECT_LE(le16(bytes, off + 28), per);
    }
  }
}

TEST(Cwa, SingleByteCorruptionDropsOnlyThatBlock) {
  Rng rng(14);
  const auto rec = random_recording(rng, 240);  // three unpacked blocks
  const auto clean = cwa::write_cwa(rec, cwa::Packing::unpacked);
  const std::size_t block = cwa::kHeaderSize + cwa::kBlockSize;  // the middle one
  for (std::size_t pos = 0; pos < cwa::kBlockSize; ++pos) {
    auto bad = clean;
    bad[block + pos] ^= static_cast<std::uint8_t>(1 + rng.uniform_int(255));
    const auto parsed = cwa::parse_cwa(bad);
    ASSERT_EQ(parsed.rejected_blocks + parsed.skipped_blocks, 1u) << "byte " << pos;
    ASSERT_EQ(parsed.samples.size(), 160u) << "byte " << pos;
    EXPECT_EQ(parsed.samples.front(), rec.samples.front());
    EXPECT_EQ(parsed.samples.back(), rec.samples.back());
  }
}

TEST(Cwa, AllBlocksCorruptIsEmptyRecording) {
  Rng rng(15);
  auto bytes = cwa::write_cwa(random_recording(rng, 300), cwa::Packing::unpacked);
  for (std::size_t off = cwa::kHeaderSize; off < bytes.size(); off += cwa::kBlockSize) bytes[off + 100] ^= 0x5a;
  EXPECT_EQ(code_of([&] { cwa::parse_cwa(bytes); }), Errc::empty_recording);
}

TEST(Cwa, EmptyRecordingWritesHeaderOnly) {
  Recording empty;
  const auto bytes = cwa::write_cwa(empty, cwa::Packing::packed);
  EXPECT_EQ(bytes.size(), cwa::kHeaderSize);
  EXPECT_EQ(code_of([&] { cwa::parse_cwa(bytes); }), Errc::empty_recording);
}

TEST(Cwa, HeaderErrors) {
  std::vector<std::uint8_t> tiny(100, 0);
  EXPECT_EQ(code_of([&] { cwa::parse_cwa(tiny); }), Errc::malformed_header);
  Rng rng(16);
  auto bytes = cwa::write_cwa(random_recording(rng, 10), cwa::Packing::unpacked);
  bytes[0] = 'X';
  EXPECT_EQ(code_of([&] { cwa::parse_cwa(bytes); }), Errc::malformed_header);
}

TEST(Cwa, UnsupportedMode) {
  Rng rng(17);
  auto bytes = cwa::write_cwa(random_recording(rng, 10), cwa::Packing::unpacked);
  bytes[cwa::kHeaderSize + 25] = 0x22;
  fix_checksum(bytes, cwa::kHeaderSize);
  EXPECT_EQ(code_of([&] { cwa::parse_cwa(bytes); }), Errc::unsupported_mode);
}

TEST(Cwa, RangeExceeded) {
  Rng rng(18);
  auto rec = random_recording(rng, 5);
  rec.samples[2].y = 200.0;
  EXPECT_EQ(code_of([&] { cwa::write_cwa(rec, cwa::Packing::unpacked); }), Errc::range_exceeded);
  rec.samples[2].y = 17.0;
  EXPECT_EQ(code_of([&] { cwa::write_cwa(rec, cwa::Packing::packed); }), Errc::range_exceeded);
  EXPECT_NO_THROW(cwa::write_cwa(rec, cwa::Packing::unpacked));
}

TEST(Cwa, DateTimeAndRateCodes) {
  // 2024-03-01T13:45:07Z, fields packed by hand.
  const std::int64_t secs = 1709300707;
  const std::uint32_t expected = (24u << 26) | (3u << 22) | (1u << 17) | (13u << 12) | (45u << 6) | 7u;
  EXPECT_EQ(cwa::pack_datetime(secs), expected);
  EXPECT_EQ(cwa::unpack_datetime(expected), secs);
  EXPECT_EQ(cwa::make_rate_code(25.0, 8.0), 0x48);
  EXPECT_DOUBLE_EQ(cwa::rate_from_code(0x48), 25.0);
  EXPECT_DOUBLE_EQ(cwa::range_from_code(0x48), 8.0);
  EXPECT_DOUBLE_EQ(cwa::rate_from_code(0x4a), 100.0);
  EXPECT_DOUBLE_EQ(cwa::range_from_code(0x0a), 16.0);
}

TEST(Cwa, GapsSurviveRoundTrip) {
  Rng rng(19);
  auto rec = random_recording(rng, 300);
  for (std::size_t i = 130; i < rec.samples.size(); ++i) rec.samples[i].t += Millis{10'000};
  const auto parsed = cwa::parse_cwa(cwa::write_cwa(rec, cwa::Packing::unpacked));
  EXPECT_EQ(parsed.samples, rec.samples);
}

TEST(Csv, ParsesRows) {
  const auto rec = csv::parse_csv(
      "timestamp,x,y,z\n"
      "2024-03-01T00:00:00.000Z,0.1,0.2,0.3\n"
      "2024-03-01T00:00:00.040Z,-1,0,1\n"
      "2024-03-01T00:00:00.080Z,1e-3,2.5,-0.5\n");
  ASSERT_EQ(rec.samples.size(), 3u);
  EXPECT_EQ(rec.source, Source::csv);
  EXPECT_EQ(rec.samples[1].x, -1.0);
  EXPECT_EQ(to_epoch_ms(rec.samples[2].t) - to_epoch_ms(rec.samples[0].t), 80);
}

TEST(Csv, ReportsFirstBadRow) {
  try {
    csv::parse_csv("timestamp,x,y,z\n2024-03-01T00:00:00Z,abc,0,0\n2024-03-01T00:00:01Z,zz,0,0\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::bad_row);
    ASSERT_TRUE(e.line().has_value());
    EXPECT_EQ(*e.line(), 2u);
  }
  EXPECT_EQ(code_of([] { csv::parse_csv("time,x,y,z\n"); }), Errc::bad_header);
}

TEST(Csv, RoundTrip) {
  Rng rng(20);
  auto rec = random_recording(rng, 200);
  for (auto& s : rec.samples) s.x = rng.normal();  // arbitrary doubles survive too
  const auto back = csv::parse_csv(csv::write_csv(rec));
  EXPECT_EQ(back.samples, rec.samples);
}

TEST(Regularize, UniformInputIsUnchanged) {
  Rng rng(21);
  const auto rec = random_recording(rng, 500);
  const auto out = regularize(rec);
  EXPECT_EQ(out.samples, rec.samples);
  ASSERT_EQ(out.segments.size(), 1u);
  EXPECT_EQ(regularize(out).samples, out.samples);
}

TEST(Regularize, DriftingRateLandsOnGrid) {
  Recording rec;
  const std::int64_t t0 = 1'700'000'000'000;
  for (int i = 0; i < static_cast<int>(24.9 * 60); ++i) {
    rec.samples.push_back(
        Sample{from_epoch_ms(t0 + std::llround(i * 1000.0 / 24.9)), static_cast<double>(i), 0.0, 1.0});
  }
  const auto out = regularize(rec);
  EXPECT_NEAR(static_cast<double>(out.samples.size()), 25.0 * 60.0, 1.0);
  for (std::size_t i = 1; i < out.samples.size(); ++i) {
    EXPECT_NEAR(static_cast<double>(to_epoch_ms(out.samples[i].t) - to_epoch_ms(out.samples[i - 1].t)), 40.0, 0.5);
  }
  // Nearest neighbour: each output value is the index of a closest input.
  for (const auto& s : out.samples) {
    std::int64_t best = INT64_MAX;
    for (const auto& in : rec.samples) best = std::min(best, std::abs(to_epoch_ms(in.t) - to_epoch_ms(s.t)));
    const auto& picked = rec.samples[static_cast<std::size_t>(s.x)];
    EXPECT_EQ(std::abs(to_epoch_ms(picked.t) - to_epoch_ms(s.t)), best);
  }
}

TEST(Regularize, LongGapSplitsSegments) {
  Rng rng(22);
  auto rec = random_recording(rng, 500);
  for (std::size_t i = 250; i < rec.samples.size(); ++i) rec.samples[i].t += Millis{10'000};
  const auto out = regularize(rec);
  ASSERT_EQ(out.segments.size(), 2u);
  EXPECT_EQ(out.segments[0].size(), 250u);
  EXPECT_EQ(out.segments[1].size(), 250u);
  EXPECT_EQ(out.samples.size(), 500u);

  // A 3 s hole is bridged instead.
  auto short_gap = random_recording(rng, 500);
  for (std::size_t i = 250; i < short_gap.samples.size(); ++i) short_gap.samples[i].t += Millis{3'000};
  const auto bridged = regularize(short_gap);
  EXPECT_EQ(bridged.segments.size(), 1u);
  EXPECT_EQ(bridged.samples.size(), 500u + 75u);
}

TEST(Regularize, TooShort) {
  Recording rec;
  rec.samples.push_back(Sample{});
  EXPECT_EQ(code_of([&] { regularize(rec); }), Errc::too_short);
}

}  // namespace
}  // namespace calfmon
