#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "calfmon/labels.hpp"
#include "calfmon/recording.hpp"
#include "calfmon/signal.hpp"

namespace calfmon::synth {

/// One movement pattern: gravity direction plus a sinusoid on a body axis.
struct Regime {
  std::string label;
  Activity activity = Activity::inactive;
  std::array<double, 3> orientation{0.0, 0.0, 1.0};
  double frequency_hz = 0.0;
  double amplitude_g = 0.0;
  std::size_t axis = 2;
  double noise_sd_g = 0.0;
};

struct BehaviourProfile {
  Behaviour behaviour = Behaviour::other;
  /// A single regime for the named behaviours; `other` wanders between several.
  std::vector<Regime> regimes;
  double dwell_mean_s = 30.0;
  double dwell_min_s = 6.0;
  /// Relative weight when choosing the next behaviour.
  double weight = 1.0;
};

using Profiles = std::array<BehaviourProfile, 4>;

Profiles default_profiles();

/// Throws Error(bad_profile) on negative amplitudes or noise, zero
/// orientation, dwell minimum below 6 s or a mean below the minimum.
void validate(const Profiles& profiles);

/// Scales frequencies, amplitudes, noise, dwell means and orientation
/// components by independent factors in [1 - spread, 1 + spread].
Profiles jitter(const Profiles& profiles, std::uint64_t seed, double spread = 0.1);

struct CalfData {
  std::string calf_id;
  Recording recording;
  signal::Ethogram ethogram;
  Profiles profiles;
};

inline constexpr std::int64_t kDefaultStartMs = 1709251200000;  // 2024-03-01T00:00:00Z

/// 25 Hz samples quantized to 1/256 g. Every behaviour appears among the
/// first four intervals when the duration allows.
CalfData generate_calf(const Profiles& profiles, double duration_s, std::uint64_t seed, std::string calf_id = "calf",
                       Timestamp start = from_epoch_ms(kDefaultStartMs));

/// Calves `calf01`... with per-calf seeds and jittered profiles. Throws
/// BadConfig below 10 calves.
std::vector<CalfData> generate_herd(std::size_t n_calves, double duration_s, std::uint64_t seed,
                                    const Profiles& base = default_profiles(), double spread = 0.1);

std::string calf_name(std::size_t index, std::size_t n_calves);

}  // namespace calfmon::synth
