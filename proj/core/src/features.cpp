#include "calfmon/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "calfmon/error.hpp"
#include "calfmon/forest.hpp"
#include "calfmon/parallel.hpp"

namespace calfmon::features {

namespace {

constexpr double kVarianceFloor = 1e-12;

// Linear-interpolation quantile of sorted data (h = (n - 1) p).
double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
  static const auto names = [] {
    std::array<std::string, kFeatureCount> out;
    for (std::size_t c = 0; c < signal::kChannels; ++c) {
      for (std::size_t s = 0; s < kStatistics; ++s) {
        out[c * kStatistics + s] = std::string(signal::kChannelNames[c]) + "_" + std::string(kStatisticNames[s]);
      }
    }
    return out;
  }();
  return names;
}

std::size_t feature_index(std::string_view name) {
  const auto& names = feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(Errc::unknown_label, "unknown feature '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::array<double, kStatistics> channel_statistics(std::span<const double> v) {
  const auto n = static_cast<double>(v.size());
  std::array<double, signal::kWindowLength> sorted_buf{};
  std::vector<double> heap_buf;
  std::span<double> sorted;
  if (v.size() <= sorted_buf.size()) {
    sorted = std::span<double>(sorted_buf.data(), v.size());
  } else {
    heap_buf.resize(v.size());
    sorted = heap_buf;
  }
  std::copy(v.begin(), v.end(), sorted.begin());
  std::sort(sorted.begin(), sorted.end());

  double sum = 0.0;
  double sum_sq = 0.0;
  for (double x : v) {
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;

  std::size_t crossings = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if ((v[i - 1] - mean) * (v[i] - mean) < 0.0) ++crossings;
  }

  std::array<double, kStatistics> out{};
  out[0] = mean;
  out[1] = quantile_sorted(sorted, 0.5);
  out[2] = std::sqrt(m2);
  out[3] = sorted.front();
  out[4] = sorted.back();
  out[5] = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  out[6] = m2 < kVarianceFloor ? 0.0 : m3 / std::pow(m2, 1.5);
  out[7] = m2 < kVarianceFloor ? 0.0 : m4 / (m2 * m2) - 3.0;
  out[8] = std::sqrt(sum_sq / n);
  out[9] = static_cast<double>(crossings) / (n - 1.0);
  out[10] = sum_sq / n;
  return out;
}

FeatureVector handcrafted(const signal::Window& w) {
  FeatureVector fv;
  for (std::size_t c = 0; c < signal::kChannels; ++c) {
    const auto stats = channel_statistics(w.channel(c));
    std::copy(stats.begin(), stats.end(), fv.values.begin() + static_cast<std::ptrdiff_t>(c * kStatistics));
  }
  return fv;
}

Eigen::MatrixXd handcrafted_matrix(std::span<const signal::Window> windows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(kFeatureCount));
  parallel_for(windows.size(), [&](std::size_t i) {
    const auto fv = handcrafted(windows[i]);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fv.values[j];
    }
  });
  return X;
}

std::vector<std::size_t> FeatureSubset::indices() const {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(feature_index(n));
  return out;
}

FeatureSubset select_features(const Eigen::MatrixXd& X, std::span<const Activity> y, std::size_t k,
                              std::uint64_t seed, std::size_t n_trees) {
  if (static_cast<std::size_t>(X.cols()) != kFeatureCount || static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(Errc::shape_mismatch, "select_features expects an n x 88 matrix with n labels");
  }
  if (k == 0 || k > kFeatureCount) throw Error(Errc::bad_config, "feature count must be in 1..88");
  if (y.size() < 50) throw Error(Errc::bad_config, "select_features needs at least 50 rows");

  std::vector<int> labels(y.size());
  std::transform(y.begin(), y.end(), labels.begin(), [](Activity a) { return static_cast<int>(a); });
  learn::ForestParams params;
  params.n_trees = n_trees;
  const auto& names = feature_names();
  const auto forest = learn::fit_rf(X, labels, {"active", "inactive"}, params, seed,
                                    std::vector<std::string>(names.begin(), names.end()));
  const auto importance = learn::impurity_importance(forest);

  std::vector<std::size_t> order(kFeatureCount);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (importance[a] != importance[b]) return importance[a] > importance[b];
    return names[a] < names[b];
  });

  FeatureSubset subset;
  for (std::size_t i = 0; i < k; ++i) {
    subset.names.push_back(names[order[i]]);
    subset.importances.push_back(importance[order[i]]);
  }
  return subset;
}

Eigen::MatrixXd project(const Eigen::MatrixXd& X, const FeatureSubset& subset) {
  const auto idx = subset.indices();
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (static_cast<Eigen::Index>(idx[j]) >= X.cols()) throw Error(Errc::shape_mismatch, "feature column out of range");
    out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(idx[j]));
  }
  return out;
}

void write_feature_csv(std::ostream& out, std::span<const std::string> column_names,
                       std::span<const std::string> calf_ids, std::span<const Timestamp> starts,
                       const Eigen::MatrixXd& X) {
  if (column_names.size() != static_cast<std::size_t>(X.cols()) || calf_ids.size() != static_cast<std::size_t>(X.rows()) ||
      starts.size() != calf_ids.size()) {
    throw Error(Errc::shape_mismatch, "feature CSV columns do not match the matrix");
  }
  out << "calf_id,start_t";
  for (const auto& n : column_names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out << calf_ids[static_cast<std::size_t>(i)] << ',' << format_iso8601(starts[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", X(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace calfmon::features
