#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "calfmon/error.hpp"
#include "calfmon/labels.hpp"
#include "calfmon/random.hpp"
#include "calfmon/time.hpp"

namespace calfmon {
namespace {

// Civil date to day number, written out from the proleptic Gregorian rules.
std::int64_t days_from_civil(int y, int m, int d) {
  std::int64_t days = 0;
  auto leap = [](int yr) { return (yr % 4 == 0 && yr % 100 != 0) || yr % 400 == 0; };
  for (int yr = 1970; yr < y; ++yr) days += leap(yr) ? 366 : 365;
  const int month_days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  for (int mo = 1; mo < m; ++mo) days += month_days[mo - 1] + (mo == 2 && leap(y) ? 1 : 0);
  return days + d - 1;
}

TEST(Time, ParseMatchesCalendarArithmetic) {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const int y = 1970 + static_cast<int>(rng.uniform_int(100));
    const int m = 1 + static_cast<int>(rng.uniform_int(12));
    const int d = 1 + static_cast<int>(rng.uniform_int(28));
    const int hh = static_cast<int>(rng.uniform_int(24));
    const int mm = static_cast<int>(rng.uniform_int(60));
    const int ss = static_cast<int>(rng.uniform_int(60));
    const int ms = static_cast<int>(rng.uniform_int(1000));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", y, m, d, hh, mm, ss, ms);
    const std::int64_t want = ((days_from_civil(y, m, d) * 24 + hh) * 60 + mm) * 60'000 + ss * 1000 + ms;
    const auto t = parse_iso8601(buf);
    EXPECT_EQ(to_epoch_ms(t), want) << buf;
    EXPECT_EQ(format_iso8601(t), buf);
  }
}

TEST(Time, OffsetsAndFractions) {
  const auto z = parse_iso8601("2024-03-01T12:00:00Z");
  EXPECT_EQ(parse_iso8601("2024-03-01T14:30:00+02:30"), z);
  EXPECT_EQ(parse_iso8601("2024-03-01T07:00:00-05:00"), z);
  EXPECT_EQ(parse_iso8601("2024-03-01 12:00:00"), z);
  EXPECT_EQ(parse_iso8601("2024-03-01T12:00:00.5Z"), z + Millis{500});
  EXPECT_EQ(parse_iso8601("2024-03-01T12:00:00.0004Z"), z);
  EXPECT_EQ(parse_iso8601("2024-03-01T12:00:00.0006Z"), z + Millis{1});
  EXPECT_EQ(parse_iso8601("2024-02-29T00:00:00Z") + Millis{86'400'000}, parse_iso8601("2024-03-01T00:00:00Z"));
  for (const char* bad : {"2024-02-30T00:00:00Z", "2024-03-01", "2024-03-01T25:00:00Z", "2024-03-01T12:00:00.Z",
                          "2024-03-01T12:00:00+2", "not a time"}) {
    try {
      parse_iso8601(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::parse_failed);
    }
  }
}

TEST(Time, UtcOffsetText) {
  EXPECT_EQ(parse_utc_offset("Z"), 0);
  EXPECT_EQ(parse_utc_offset("+05:30"), 330);
  EXPECT_EQ(parse_utc_offset("-0800"), -480);
  EXPECT_EQ(parse_utc_offset("90"), 90);
  EXPECT_EQ(format_utc_offset(-210), "-03:30");
  EXPECT_EQ(format_utc_offset(0), "+00:00");
  EXPECT_THROW(parse_utc_offset("+25:00"), Error);
}

TEST(Time, HourRounding) {
  const auto t = parse_iso8601("2024-03-01T12:34:56.789Z");
  EXPECT_EQ(floor_hour(t), parse_iso8601("2024-03-01T12:00:00Z"));
  EXPECT_EQ(ceil_hour(t), parse_iso8601("2024-03-01T13:00:00Z"));
  EXPECT_EQ(ceil_hour(floor_hour(t)), floor_hour(t));
}

TEST(Labels, NamesRoundTrip) {
  for (auto b : kBehaviours) EXPECT_EQ(parse_behaviour(to_string(b)), b);
  for (auto a : kActivities) EXPECT_EQ(parse_activity(to_string(a)), a);
  EXPECT_FALSE(parse_behaviour("grazing"));
  EXPECT_FALSE(parse_activity("asleep"));
}

TEST(Labels, FreeFormLabelsMapToOther) {
  EXPECT_EQ(behaviour_from_label("lying"), Behaviour::lying);
  EXPECT_EQ(behaviour_from_label("drinking milk"), Behaviour::drinking_milk);
  EXPECT_EQ(behaviour_from_label("grooming"), Behaviour::other);
  EXPECT_EQ(implied_activity(Behaviour::lying), Activity::inactive);
  EXPECT_EQ(implied_activity(Behaviour::running), Activity::active);
  EXPECT_EQ(implied_activity(Behaviour::drinking_milk), Activity::active);
  EXPECT_FALSE(implied_activity(Behaviour::other));
}

TEST(Random, EngineSequenceIsStandard) {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the standard.
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Random, DistributionMoments) {
  Rng rng(17);
  const int n = 200'000;
  double su = 0, sn = 0, sn2 = 0;
  std::array<int, 7> buckets{};
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    ++buckets[rng.uniform_int(7)];
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.015);
  for (int b : buckets) EXPECT_NEAR(b, n / 7.0, 5.0 * std::sqrt(n / 7.0));
  EXPECT_THROW(rng.uniform_int(0), Error);
}

TEST(Random, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t p = 0; p < 20; ++p) {
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(p, i));
  }
  EXPECT_EQ(seen.size(), 1000u);
  static_assert(derive_seed(7, 1) == derive_seed(7, 1));
}

TEST(Errors, CodesHaveNames) {
  const Error e(Errc::bad_row, "oops", 12);
  EXPECT_EQ(std::string(e.what()), "BadRow: oops");
  EXPECT_EQ(e.line(), 12u);
  EXPECT_EQ(to_string(Errc::too_few_groups), "TooFewGroups");
}

}  // namespace
}  // namespace calfmon
