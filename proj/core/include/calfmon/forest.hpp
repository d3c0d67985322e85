#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace calfmon::learn {

struct ForestParams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unbounded when empty
  std::size_t min_samples_leaf = 1;
  /// Features tried per split; floor(sqrt(k)) when empty.
  std::optional<std::size_t> mtry;

  /// Throws BadConfig for zero trees, zero depth or zero leaf size.
  void validate() const;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // rows with value <= threshold go left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t depth = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Nodes in depth-first pre-order (root first, left subtree before right).
/// `counts` holds the bootstrap-weighted class counts of every node,
/// row-major (node * n_classes + class).
struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct ForestModel {
  std::vector<std::string> classes;
  std::vector<Tree> trees;
  ForestParams params;
  std::vector<std::string> feature_names;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
  /// Free-form JSON carried through persistence.
  std::string metadata;
};

/// Hooks for instrumenting growth; every feature value read while growing tree
/// `tree` is reported through `on_row_read`.
class FitObserver {
 public:
  virtual ~FitObserver() = default;
  virtual void on_bootstrap(std::size_t tree, std::span<const std::uint32_t> counts) = 0;
  virtual void on_row_read(std::size_t tree, std::size_t row) = 0;
};

/// Bootstrap + CART (Gini) forest. Tree i draws from a generator seeded by
/// (seed, i), so the first m trees of a larger forest equal an m-tree forest
/// with the same seed, and depth limits only truncate growth. Labels are
/// indices into `classes`.
ForestModel fit_rf(const Eigen::MatrixXd& X, std::span<const int> y, std::vector<std::string> classes,
                   const ForestParams& params, std::uint64_t seed,
                   std::vector<std::string> feature_names = {}, FitObserver* observer = nullptr);

struct ForestPrediction {
  std::vector<int> labels;
  Eigen::MatrixXd votes;  // n x classes, fraction of trees
};

/// Majority vote over trees; ties go to the earlier class.
ForestPrediction predict_rf(const ForestModel& m, const Eigen::MatrixXd& X);

/// The forest `fit_rf` would have produced with `n_trees` trees and depth
/// limit `max_depth` (nullopt keeps the current limit). Requires n_trees <=
/// current count and a limit no deeper than the current one.
ForestModel truncated(const ForestModel& m, std::size_t n_trees, std::optional<std::size_t> max_depth);

/// Mean over trees of each tree's normalized Gini impurity decrease per
/// feature; sums to 1 unless no tree split.
std::vector<double> impurity_importance(const ForestModel& m);

}  // namespace calfmon::learn
