#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "calfmon/bytes.hpp"
#include "calfmon/signal.hpp"

// Random convolutional kernel transform. Each kernel reads one channel of a
// window, convolves it (dilated, optionally zero-padded) and pools the output
// into the proportion of positive values and the maximum.
namespace calfmon::rocket {

inline constexpr std::size_t kDefaultKernelCount = 10'000;
inline constexpr std::array<int, 3> kKernelLengths{7, 9, 11};

struct Kernel {
  int length = 9;
  std::vector<double> weights;
  double bias = 0.0;
  int dilation = 1;
  int padding = 0;
  int channel = 0;

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

struct KernelSet {
  std::vector<Kernel> kernels;
  std::uint64_t seed = 0;
  std::size_t input_length = signal::kWindowLength;
  std::size_t num_channels = signal::kChannels;

  friend bool operator==(const KernelSet&, const KernelSet&) = default;
};

/// Draw order per kernel, all from one Rng(seed):
///   length (uniform_int 3), weights (`length` normals, then mean-centred),
///   bias (uniform [-1, 1)), dilation exponent (uniform [0, log2((L-1)/(len-1)))),
///   padding flag (bernoulli 1/2), channel (uniform_int num_channels).
KernelSet sample_kernels(std::uint64_t seed, std::size_t count,
                         std::size_t input_length = signal::kWindowLength,
                         std::size_t num_channels = signal::kChannels);

struct Pooled {
  double ppv = 0.0;
  double max = 0.0;
};

/// Zero mean, unit (population) sd in place; sd below 1e-12 gives all zeros.
void standardize(std::span<double> series);

/// Kernel over an already standardized series. Throws NoValidPositions when
/// the dilated kernel is longer than the padded series.
Pooled apply_kernel(std::span<const double> series, const Kernel& k);

/// Standardizes the kernel's channel of `w`, then applies it.
Pooled apply_kernel(const signal::Window& w, const Kernel& k);

/// n x 2K matrix, columns (ppv, max) per kernel in kernel order.
Eigen::MatrixXd transform(std::span<const signal::Window> windows, const KernelSet& ks);

void write(bytes::Writer& out, const KernelSet& ks);
KernelSet read(bytes::Reader& in);

}  // namespace calfmon::rocket
