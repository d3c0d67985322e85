#include "calfmon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "calfmon/error.hpp"
#include "calfmon/parallel.hpp"
#include "calfmon/random.hpp"

namespace calfmon::synth {

namespace {

constexpr double kRate = 25.0;
constexpr std::int64_t kStepMs = 40;
constexpr double kRange = 8.0;

Regime regime(std::string label, Activity a, std::array<double, 3> o, double f, double amp, std::size_t axis,
              double noise) {
  return Regime{std::move(label), a, o, f, amp, axis, noise};
}

double quantize(double v) {
  return std::clamp(std::round(v * 256.0) / 256.0, -kRange, kRange);
}

std::size_t dwell_samples(const BehaviourProfile& p, Rng& rng, double cap_s) {
  // Minimum plus an exponential tail with the requested mean.
  const double tail = p.dwell_mean_s - p.dwell_min_s;
  double s = p.dwell_min_s + (tail > 0 ? -tail * std::log1p(-rng.uniform()) : 0.0);
  s = std::min(s, std::max(cap_s, p.dwell_min_s));
  return static_cast<std::size_t>(std::llround(s * kRate));
}

std::size_t pick_next(const Profiles& profiles, std::size_t current, Rng& rng) {
  double total = 0.0;
  for (std::size_t b = 0; b < profiles.size(); ++b) {
    if (b != current) total += profiles[b].weight;
  }
  double u = rng.uniform() * total;
  for (std::size_t b = 0; b < profiles.size(); ++b) {
    if (b == current) continue;
    if (u < profiles[b].weight) return b;
    u -= profiles[b].weight;
  }
  return current == 0 ? 1 : 0;
}

}  // namespace

Profiles default_profiles() {
  Profiles p;
  p[0] = {Behaviour::lying,
          {regime("lying", Activity::inactive, {0.0, 0.6, 0.8}, 0.4, 0.02, 1, 0.02)},
          90.0,
          6.0,
          0.35};
  p[1] = {Behaviour::running,
          {regime("running", Activity::active, {0.1, 0.0, 0.995}, 2.5, 0.8, 2, 0.05)},
          20.0,
          6.0,
          0.2};
  p[2] = {Behaviour::drinking_milk,
          {regime("drinking_milk", Activity::active, {0.7, 0.0, 0.714}, 1.0, 0.15, 0, 0.05)},
          45.0,
          6.0,
          0.2};
  p[3] = {Behaviour::other,
          {regime("standing", Activity::inactive, {0.1, 0.0, 0.995}, 1.5, 0.04, 0, 0.015),
           regime("grooming", Activity::active, {0.5, 0.4, 0.768}, 0.8, 0.2, 1, 0.06),
           regime("walking", Activity::active, {0.2, 0.0, 0.98}, 1.8, 0.35, 2, 0.08),
           regime("nosing", Activity::active, {0.62, 0.1, 0.75}, 1.15, 0.12, 0, 0.06)},
          60.0,
          6.0,
          0.25};
  return p;
}

void validate(const Profiles& profiles) {
  for (const auto& p : profiles) {
    const std::string name(to_string(p.behaviour));
    if (p.regimes.empty()) throw Error(Errc::bad_profile, name + ": no regimes");
    if (p.dwell_min_s < 6.0) throw Error(Errc::bad_profile, name + ": dwell minimum below 6 s");
    if (p.dwell_mean_s < p.dwell_min_s) throw Error(Errc::bad_profile, name + ": dwell mean below its minimum");
    if (!(p.weight > 0.0)) throw Error(Errc::bad_profile, name + ": weight must be positive");
    for (const auto& r : p.regimes) {
      if (r.amplitude_g < 0.0 || r.noise_sd_g < 0.0 || r.frequency_hz < 0.0) {
        throw Error(Errc::bad_profile, name + ": negative amplitude, noise or frequency");
      }
      if (r.axis > 2) throw Error(Errc::bad_profile, name + ": axis must be 0, 1 or 2");
      const double norm = std::hypot(r.orientation[0], r.orientation[1], r.orientation[2]);
      if (!(norm > 1e-9) || !std::isfinite(norm)) throw Error(Errc::bad_profile, name + ": zero orientation");
    }
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].behaviour != kBehaviours[i]) throw Error(Errc::bad_profile, "profiles out of class order");
  }
}

Profiles jitter(const Profiles& profiles, std::uint64_t seed, double spread) {
  Rng rng(seed);
  auto factor = [&] { return 1.0 + rng.uniform(-spread, spread); };
  Profiles out = profiles;
  for (auto& p : out) {
    p.dwell_mean_s = std::max(p.dwell_min_s, p.dwell_mean_s * factor());
    for (auto& r : p.regimes) {
      r.frequency_hz *= factor();
      r.amplitude_g *= factor();
      r.noise_sd_g *= factor();
      for (auto& o : r.orientation) o *= factor();
    }
  }
  return out;
}

CalfData generate_calf(const Profiles& profiles, double duration_s, std::uint64_t seed, std::string calf_id,
                       Timestamp start) {
  validate(profiles);
  if (!(duration_s >= 60.0)) throw Error(Errc::bad_config, "duration must be at least 60 s");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * kRate));

  CalfData out;
  out.calf_id = calf_id;
  out.profiles = profiles;
  out.recording.rate_hz = kRate;
  out.recording.source = Source::cwa;
  out.recording.device.session_id = static_cast<std::uint32_t>(seed & 0xffffffffu);
  out.recording.samples.resize(n);

  std::array<std::size_t, 4> order{0, 1, 2, 3};
  for (std::size_t i = 0; i < 3; ++i) std::swap(order[i], order[i + rng.uniform_int(4 - i)]);

  const double cap = duration_s / 4.0;
  std::size_t pos = 0;
  std::size_t current = order[0];
  std::size_t interval = 0;
  auto time_at = [&](std::size_t i) { return start + Millis{static_cast<std::int64_t>(i) * kStepMs}; };

  while (pos < n) {
    if (interval > 0) current = interval < 4 ? order[interval] : pick_next(profiles, current, rng);
    const auto& prof = profiles[current];
    const std::size_t len = std::min(n - pos, dwell_samples(prof, rng, interval < 4 ? cap : 1e300));
    const std::size_t end = pos + len;

    // `other` wanders between its regimes, each stint at least the minimum dwell.
    std::size_t sub = pos;
    std::size_t reg = prof.regimes.size() > 1 ? rng.uniform_int(prof.regimes.size()) : 0;
    while (sub < end) {
      std::size_t sub_end = end;
      if (prof.regimes.size() > 1) {
        const auto min_len = static_cast<std::size_t>(prof.dwell_min_s * kRate);
        const auto stint = static_cast<std::size_t>(
            std::llround((prof.dwell_min_s + rng.uniform() * prof.dwell_min_s * 2.0) * kRate));
        sub_end = std::min(end, sub + stint);
        if (end - sub_end < min_len) sub_end = end;
      }
      const Regime& r = prof.regimes[reg];
      const double norm = std::hypot(r.orientation[0], r.orientation[1], r.orientation[2]);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t i = sub; i < sub_end; ++i) {
        const double t = static_cast<double>(i - sub) / kRate;
        std::array<double, 3> v{};
        for (std::size_t a = 0; a < 3; ++a) v[a] = r.orientation[a] / norm;
        v[r.axis] += r.amplitude_g * std::sin(2.0 * std::numbers::pi * r.frequency_hz * t + phase);
        for (std::size_t a = 0; a < 3; ++a) v[a] += r.noise_sd_g * rng.normal();
        out.recording.samples[i] = Sample{time_at(i), quantize(v[0]), quantize(v[1]), quantize(v[2])};
      }
      out.ethogram.intervals.push_back(
          signal::EthogramInterval{calf_id, time_at(sub), time_at(sub_end), r.label, r.activity});
      sub = sub_end;
      if (prof.regimes.size() > 1) reg = (reg + 1 + rng.uniform_int(prof.regimes.size() - 1)) % prof.regimes.size();
    }
    pos = end;
    ++interval;
  }
  return out;
}

std::string calf_name(std::size_t index, std::size_t n_calves) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n_calves).size());
  std::string digits = std::to_string(index + 1);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "calf" + digits;
}

std::vector<CalfData> generate_herd(std::size_t n_calves, double duration_s, std::uint64_t seed, const Profiles& base,
                                    double spread) {
  if (n_calves < 10) throw Error(Errc::bad_config, "a herd needs at least 10 calves");
  if (spread < 0.0 || spread >= 1.0) throw Error(Errc::bad_config, "jitter spread must be in [0, 1)");
  validate(base);
  std::vector<CalfData> herd(n_calves);
  parallel_for(n_calves, [&](std::size_t i) {
    const std::uint64_t calf_seed = derive_seed(seed, i);
    const Profiles p = jitter(base, derive_seed(calf_seed, 0), spread);
    herd[i] = generate_calf(p, duration_s, derive_seed(calf_seed, 1), calf_name(i, n_calves));
  });
  return herd;
}

}  // namespace calfmon::synth
