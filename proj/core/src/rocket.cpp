#include "calfmon/rocket.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "calfmon/error.hpp"
#include "calfmon/parallel.hpp"
#include "calfmon/random.hpp"

namespace calfmon::rocket {

KernelSet sample_kernels(std::uint64_t seed, std::size_t count, std::size_t input_length,
                         std::size_t num_channels) {
  if (count == 0) throw Error(Errc::bad_config, "kernel count must be positive");
  if (input_length < 12) throw Error(Errc::bad_config, "input length must be at least 12");
  if (num_channels == 0) throw Error(Errc::bad_config, "channel count must be positive");

  KernelSet ks;
  ks.seed = seed;
  ks.input_length = input_length;
  ks.num_channels = num_channels;
  ks.kernels.reserve(count);

  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Kernel k;
    k.length = kKernelLengths[rng.uniform_int(kKernelLengths.size())];
    k.weights.resize(static_cast<std::size_t>(k.length));
    for (auto& w : k.weights) w = rng.normal();
    const double mean = std::accumulate(k.weights.begin(), k.weights.end(), 0.0) / k.length;
    for (auto& w : k.weights) w -= mean;
    k.bias = rng.uniform(-1.0, 1.0);
    const double max_exponent =
        std::log2(static_cast<double>(input_length - 1) / static_cast<double>(k.length - 1));
    k.dilation = static_cast<int>(std::floor(std::pow(2.0, rng.uniform(0.0, max_exponent))));
    k.padding = rng.bernoulli(0.5) ? ((k.length - 1) * k.dilation) / 2 : 0;
    k.channel = static_cast<int>(rng.uniform_int(num_channels));
    ks.kernels.push_back(std::move(k));
  }
  return ks;
}

void standardize(std::span<double> series) {
  const auto n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd < 1e-12) {
    std::fill(series.begin(), series.end(), 0.0);
    return;
  }
  for (auto& v : series) v = (v - mean) / sd;
}

Pooled apply_kernel(std::span<const double> series, const Kernel& k) {
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t span = static_cast<std::ptrdiff_t>(k.length - 1) * k.dilation;
  const std::ptrdiff_t out_len = n + 2 * k.padding - span;
  if (out_len <= 0 || k.weights.size() != static_cast<std::size_t>(k.length)) {
    throw Error(Errc::no_valid_positions, "kernel span exceeds the padded series");
  }

  std::ptrdiff_t positive = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::ptrdiff_t i = 0; i < out_len; ++i) {
    double acc = k.bias;
    std::ptrdiff_t idx = i - k.padding;
    for (int j = 0; j < k.length; ++j, idx += k.dilation) {
      if (idx >= 0 && idx < n) acc += k.weights[static_cast<std::size_t>(j)] * series[static_cast<std::size_t>(idx)];
    }
    if (acc > 0.0) ++positive;
    best = std::max(best, acc);
  }
  return {static_cast<double>(positive) / static_cast<double>(out_len), best};
}

Pooled apply_kernel(const signal::Window& w, const Kernel& k) {
  if (k.channel < 0 || static_cast<std::size_t>(k.channel) >= signal::kChannels) {
    throw Error(Errc::shape_mismatch, "kernel channel out of range");
  }
  std::array<double, signal::kWindowLength> buf{};
  const auto ch = w.channel(static_cast<std::size_t>(k.channel));
  std::copy(ch.begin(), ch.end(), buf.begin());
  standardize(buf);
  return apply_kernel(buf, k);
}

Eigen::MatrixXd transform(std::span<const signal::Window> windows, const KernelSet& ks) {
  if (ks.input_length != signal::kWindowLength || ks.num_channels != signal::kChannels) {
    throw Error(Errc::shape_mismatch, "kernel set was sampled for a different window shape");
  }
  for (const auto& k : ks.kernels) {
    if (k.channel < 0 || static_cast<std::size_t>(k.channel) >= ks.num_channels) {
      throw Error(Errc::shape_mismatch, "kernel channel out of range");
    }
  }
  const auto n_kernels = static_cast<Eigen::Index>(ks.kernels.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), 2 * n_kernels);
  parallel_for(windows.size(), [&](std::size_t i) {
    signal::Window standardized = windows[i];
    for (std::size_t c = 0; c < signal::kChannels; ++c) standardize(standardized.channel(c));
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < n_kernels; ++k) {
      const auto& kernel = ks.kernels[static_cast<std::size_t>(k)];
      const auto pooled = apply_kernel(standardized.channel(static_cast<std::size_t>(kernel.channel)), kernel);
      out(row, 2 * k) = pooled.ppv;
      out(row, 2 * k + 1) = pooled.max;
    }
  });
  return out;
}

void write(bytes::Writer& out, const KernelSet& ks) {
  out.u16(1);  // section layout version
  out.u64(ks.seed);
  out.u32(static_cast<std::uint32_t>(ks.input_length));
  out.u32(static_cast<std::uint32_t>(ks.num_channels));
  out.u32(static_cast<std::uint32_t>(ks.kernels.size()));
  for (const auto& k : ks.kernels) {
    out.u8(static_cast<std::uint8_t>(k.length));
    out.u16(static_cast<std::uint16_t>(k.dilation));
    out.u16(static_cast<std::uint16_t>(k.padding));
    out.u16(static_cast<std::uint16_t>(k.channel));
    out.f64(k.bias);
    for (double w : k.weights) out.f64(w);
  }
}

KernelSet read(bytes::Reader& in) {
  if (in.u16() != 1) throw Error(Errc::version_unsupported, "kernel set section version");
  KernelSet ks;
  ks.seed = in.u64();
  ks.input_length = in.u32();
  ks.num_channels = in.u32();
  const auto count = in.u32();
  if (count > in.remaining()) throw Error(Errc::truncated, "kernel count exceeds section size");
  ks.kernels.resize(count);
  for (auto& k : ks.kernels) {
    k.length = in.u8();
    k.dilation = in.u16();
    k.padding = in.u16();
    k.channel = in.u16();
    k.bias = in.f64();
    k.weights.resize(static_cast<std::size_t>(k.length));
    for (auto& w : k.weights) w = in.f64();
  }
  return ks;
}

}  // namespace calfmon::rocket
