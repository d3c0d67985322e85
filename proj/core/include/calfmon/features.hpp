#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "calfmon/labels.hpp"
#include "calfmon/signal.hpp"

namespace calfmon::features {

inline constexpr std::size_t kStatistics = 11;
inline constexpr std::size_t kFeatureCount = signal::kChannels * kStatistics;

inline constexpr std::array<std::string_view, kStatistics> kStatisticNames{
    "mean", "median", "sd", "min", "max", "iqr", "skew", "kurtosis", "rms", "zcr", "energy"};

/// `<channel>_<statistic>`, channel-major: index = channel * 11 + statistic.
const std::array<std::string, kFeatureCount>& feature_names();

/// Throws Error(unknown_label) for a name outside the catalog.
std::size_t feature_index(std::string_view name);

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
};

/// The 11 statistics of one 75-sample channel, in kStatisticNames order.
std::array<double, kStatistics> channel_statistics(std::span<const double> v);

FeatureVector handcrafted(const signal::Window& w);

/// One row per window.
Eigen::MatrixXd handcrafted_matrix(std::span<const signal::Window> windows);

struct FeatureSubset {
  std::vector<std::string> names;
  /// Mean impurity decrease of each selected feature at selection time.
  std::vector<double> importances;

  std::vector<std::size_t> indices() const;
};

/// Ranks the 88 columns of `X` by forest impurity importance (300 trees) and
/// keeps the top `k`; ties go to the lexicographically smaller name.
FeatureSubset select_features(const Eigen::MatrixXd& X, std::span<const Activity> y, std::size_t k,
                              std::uint64_t seed, std::size_t n_trees = 300);

/// Columns of `X` in subset order.
Eigen::MatrixXd project(const Eigen::MatrixXd& X, const FeatureSubset& subset);

/// Header `calf_id,start_t,<names...>`, one row per window.
void write_feature_csv(std::ostream& out, std::span<const std::string> column_names,
                       std::span<const std::string> calf_ids, std::span<const Timestamp> starts,
                       const Eigen::MatrixXd& X);

}  // namespace calfmon::features
