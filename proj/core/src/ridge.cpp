#include "calfmon/ridge.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "calfmon/error.hpp"

namespace calfmon::learn {

namespace {

constexpr double kMinSigma = 1e-12;

int argmax_first(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace

std::vector<double> default_alphas() {
  std::vector<double> out(10);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::pow(10.0, -3.0 + 6.0 * static_cast<double>(i) / 9.0);
  return out;
}

RidgeModel fit_ridge_cv(const Eigen::MatrixXd& X, std::span<const int> y, std::vector<std::string> classes,
                        std::vector<double> alphas) {
  const auto n = X.rows();
  const auto n_classes = static_cast<Eigen::Index>(classes.size());
  if (static_cast<std::size_t>(n) != y.size()) throw Error(Errc::shape_mismatch, "label count does not match rows");
  if (X.cols() < 1) throw Error(Errc::shape_mismatch, "ridge needs at least one feature");
  if (alphas.empty()) throw Error(Errc::bad_config, "alpha grid is empty");
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw Error(Errc::bad_config, "alphas must be positive and finite");
  }
  if (n_classes < 2) throw Error(Errc::degenerate_labels, "ridge needs at least two classes");
  if (n < n_classes + 1) throw Error(Errc::degenerate_labels, "too few rows for the class count");
  std::vector<std::size_t> support(classes.size(), 0);
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw Error(Errc::unknown_label, "label index outside the class list");
    ++support[static_cast<std::size_t>(label)];
  }
  std::size_t present = 0;
  for (auto s : support) present += s > 0 ? 1 : 0;
  if (present < 2) throw Error(Errc::degenerate_labels, "only one class present in the labels");
  if (!X.allFinite()) throw Error(Errc::singular_input, "non-finite feature values");

  RidgeModel m;
  m.classes = std::move(classes);
  m.n_features_in = static_cast<std::size_t>(X.cols());
  m.alphas = std::move(alphas);

  // Column statistics; zero-variance columns are dropped.
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::RowVectorXd sd = ((X.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (sd(j) > kMinSigma) m.kept.push_back(static_cast<std::size_t>(j));
  }
  if (m.kept.empty()) throw Error(Errc::singular_input, "every feature has zero variance");
  const auto p = static_cast<Eigen::Index>(m.kept.size());
  m.mu.resize(p);
  m.sigma.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    m.mu(j) = mean(static_cast<Eigen::Index>(m.kept[static_cast<std::size_t>(j)]));
    m.sigma(j) = sd(static_cast<Eigen::Index>(m.kept[static_cast<std::size_t>(j)]));
  }
  const Eigen::MatrixXd Z = standardize_inputs(m, X);

  Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(n, n_classes, -1.0);
  for (Eigen::Index i = 0; i < n; ++i) Y(i, y[static_cast<std::size_t>(i)]) = 1.0;
  const Eigen::RowVectorXd y_mean = Y.colwise().mean();
  const Eigen::MatrixXd Yc = Y.rowwise() - y_mean;

  // Z = U S V^T. The columns of A = U S (= Z V) and s^2 come from the
  // eigendecomposition of the smaller Gram matrix. The hat matrix of ridge
  // with an unpenalized intercept on centred Z is
  //   H = 11^T / n + A diag(1 / (s^2 + alpha)) A^T.
  const bool tall = n >= p;
  Eigen::MatrixXd A;
  Eigen::MatrixXd basis;  // V when tall, U otherwise
  Eigen::VectorXd s2;
  if (tall) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    basis = eig.eigenvectors();
    s2 = eig.eigenvalues().cwiseMax(0.0);
    A = Z * basis;
  } else {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(Z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    basis = eig.eigenvectors();
    s2 = eig.eigenvalues().cwiseMax(0.0);
    A = basis * s2.cwiseSqrt().asDiagonal();
  }
  const Eigen::MatrixXd AtY = A.transpose() * Yc;
  const Eigen::MatrixXd A2 = A.array().square().matrix();
  const double inv_n = 1.0 / static_cast<double>(n);

  m.loo_errors.resize(m.alphas.size());
  std::size_t best = 0;
  for (std::size_t a = 0; a < m.alphas.size(); ++a) {
    const Eigen::VectorXd d = (s2.array() + m.alphas[a]).inverse();
    const Eigen::MatrixXd fitted = A * (d.asDiagonal() * AtY);
    const Eigen::VectorXd h = (A2 * d).array() + inv_n;
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double denom = 1.0 - h(i);
      for (Eigen::Index c = 0; c < n_classes; ++c) {
        const double e = (Yc(i, c) - fitted(i, c)) / denom;
        err += e * e;
      }
    }
    m.loo_errors[a] = err;
    if (err < m.loo_errors[best]) best = a;
  }
  m.alpha = m.alphas[best];

  const Eigen::VectorXd d = (s2.array() + m.alpha).inverse();
  Eigen::MatrixXd coef;  // p x classes
  if (tall) {
    coef = basis * (d.asDiagonal() * AtY);
  } else {
    coef = Z.transpose() * (basis * (d.asDiagonal() * (basis.transpose() * Yc)));
  }
  m.W = coef.transpose();
  m.b = y_mean.transpose();
  return m;
}

Eigen::MatrixXd standardize_inputs(const RidgeModel& m, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != m.n_features_in) {
    throw Error(Errc::shape_mismatch, "expected " + std::to_string(m.n_features_in) + " feature columns, got " +
                                          std::to_string(X.cols()));
  }
  const auto p = static_cast<Eigen::Index>(m.kept.size());
  Eigen::MatrixXd Z(X.rows(), p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Z.col(j) = (X.col(static_cast<Eigen::Index>(m.kept[static_cast<std::size_t>(j)])).array() - m.mu(j)) / m.sigma(j);
  }
  return Z;
}

RidgePrediction predict_ridge(const RidgeModel& m, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd Z = standardize_inputs(m, X);
  RidgePrediction out;
  out.decision = (Z * m.W.transpose()).rowwise() + m.b.transpose();
  out.labels.resize(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.labels[static_cast<std::size_t>(i)] = argmax_first(out.decision.row(i));
  return out;
}

}  // namespace calfmon::learn
