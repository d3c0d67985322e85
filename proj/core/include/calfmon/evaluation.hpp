#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "calfmon/forest.hpp"
#include "calfmon/ridge.hpp"

namespace calfmon::eval {

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

/// Calf-grouped split: a held-out test group plus repeated random validation
/// draws from the remaining calves. All id lists are sorted.
struct SplitPlan {
  std::vector<std::string> test_calves;
  std::vector<std::string> train_calves;
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
};

inline constexpr double kHoldoutFraction = 0.2;
inline constexpr std::size_t kRepeats = 10;

/// round(20% of n) (at least 1) test calves, then `repeats` independent draws
/// of round(20%) of the rest as validation. Throws TooFewGroups below 10.
SplitPlan make_split(std::vector<std::string> calf_ids, std::uint64_t seed, std::size_t repeats = kRepeats);

/// Throws Error(validation_failed) when any train portion shares a calf with
/// its evaluation portion.
void check_no_leakage(const SplitPlan& plan);

/// Windows with their calf and class index.
struct LabeledData {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<std::string> calf;
  std::vector<std::string> classes;

  std::size_t rows() const noexcept { return y.size(); }
};

/// Rows belonging to `calves`, in original order.
LabeledData subset(const LabeledData& data, std::span<const std::string> calves);

/// Rows = true class, columns = predicted class. Throws UnknownLabel for
/// labels outside [0, n_classes) and ShapeMismatch for length mismatch.
Eigen::MatrixXi confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes);

struct ClassScores {
  std::string name;
  long support = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  /// No predictions for this class; precision reported as 0.
  bool precision_undefined = false;
};

struct Scores {
  std::vector<ClassScores> per_class;
  double balanced_accuracy = 0.0;
};

/// Throws EmptyClassRow when a class has no true samples.
Scores metrics(const Eigen::MatrixXi& confusion, std::span<const std::string> classes);

struct GridEntry {
  std::string params;  // compact JSON of the grid point
  std::vector<double> fold_scores;
  double mean_score = 0.0;
};

struct GridResult {
  std::size_t best = 0;
  std::vector<GridEntry> trace;
};

/// Mean validation balanced accuracy over the plan's folds for each point;
/// ties keep the earlier point. Forests sharing a leaf size and mtry are grown
/// once at the largest tree count and depth and truncated per point.
GridResult grid_search(std::span<const learn::ForestParams> grid, const LabeledData& data, const SplitPlan& plan,
                       std::uint64_t seed);

struct RidgeParams {
  std::vector<double> alphas = learn::default_alphas();
};

GridResult grid_search(std::span<const RidgeParams> grid, const LabeledData& data, const SplitPlan& plan);

std::string to_json(const learn::ForestParams& p);
std::string to_json(const RidgeParams& p);

/// The default evaluation grid: n_trees {100, 300, 500} x max_depth
/// {unbounded, 10, 20} x min_samples_leaf {1, 5, 10}.
std::vector<learn::ForestParams> default_forest_grid();

struct EvalReport {
  std::string model;
  std::vector<std::string> classes;
  Eigen::MatrixXi confusion;
  Scores scores;
  std::string chosen_params;  // JSON
  GridResult grid;
  SplitPlan plan;
  std::size_t test_windows = 0;
};

/// Stable-key JSON with floats rounded to 9 significant digits.
std::string to_json(const EvalReport& r);

}  // namespace calfmon::eval
