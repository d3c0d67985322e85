#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "calfmon/rocket.hpp"

namespace calfmon::learn {

/// 10 log-spaced values from 1e-3 to 1e3.
std::vector<double> default_alphas();

/// One-vs-rest ridge classifier whose penalty is chosen by closed-form
/// leave-one-out error.
struct RidgeModel {
  std::vector<std::string> classes;
  std::size_t n_features_in = 0;
  /// Input columns kept after dropping zero-variance ones, ascending.
  std::vector<std::size_t> kept;
  Eigen::VectorXd mu;     // over kept columns
  Eigen::VectorXd sigma;  // over kept columns, all > 0
  Eigen::MatrixXd W;      // classes x kept, on standardized inputs
  Eigen::VectorXd b;      // classes
  double alpha = 1.0;
  std::vector<double> alphas;
  /// Total squared LOO error for each entry of `alphas`.
  std::vector<double> loo_errors;
  std::optional<rocket::KernelSet> kernels;
  std::string metadata;
};

/// Standardizes with training statistics, encodes targets as +/-1 per class
/// and, for every alpha, computes LOO residuals (y - yhat) / (1 - h_ii) from
/// a spectral decomposition of the centred design. The smallest total error
/// wins (earliest alpha on ties); W and b are refit at that alpha.
RidgeModel fit_ridge_cv(const Eigen::MatrixXd& X, std::span<const int> y, std::vector<std::string> classes,
                        std::vector<double> alphas = default_alphas());

struct RidgePrediction {
  std::vector<int> labels;
  Eigen::MatrixXd decision;  // n x classes
};

/// Argmax of the decision values; ties go to the earlier class.
RidgePrediction predict_ridge(const RidgeModel& m, const Eigen::MatrixXd& X);

/// Standardized kept columns of X, as seen by W.
Eigen::MatrixXd standardize_inputs(const RidgeModel& m, const Eigen::MatrixXd& X);

}  // namespace calfmon::learn
