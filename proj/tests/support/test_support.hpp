#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "calfmon/random.hpp"
#include "calfmon/recording.hpp"
#include "calfmon/signal.hpp"
#include "calfmon/time.hpp"

namespace calfmon::testing {

/// Uniform 25 Hz recording with values on the 1/256 g grid.
inline Recording random_recording(Rng& rng, std::size_t n, double amplitude = 2.0) {
  Recording rec;
  rec.rate_hz = 25.0;
  rec.device.device_id = static_cast<std::uint16_t>(rng.uniform_int(65536));
  rec.device.session_id = static_cast<std::uint32_t>(rng.uniform_int(1u << 31));
  const std::int64_t t0 = 1'600'000'000'000 + static_cast<std::int64_t>(rng.uniform_int(1'000'000'000));
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto q = [&] { return std::round(rng.uniform(-amplitude, amplitude) * 256.0) / 256.0 + 0.0; };  // no -0
    rec.samples[i] = Sample{from_epoch_ms(t0 + 40 * static_cast<std::int64_t>(i)), q(), q(), q()};
  }
  return rec;
}

inline signal::Window random_window(Rng& rng, double scale = 1.0) {
  signal::Window w;
  w.start_t = from_epoch_ms(1'700'000'000'000);
  for (auto& v : w.values) v = rng.normal(0.0, scale);
  return w;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("calfmon_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace calfmon::testing
