#ifndef AIRFI_FEAT_AUGMENT_HPP
#define AIRFI_FEAT_AUGMENT_HPP

#include "airfi/common.hpp"
#include "airfi/rng.hpp"

#include <cmath>
#include <vector>

namespace airfi {

struct FeatAugConfig {
  float sigma = 0.1f;   // stddev of the scale (around 1) and bias (around 0)
  float lambda = 0.9f;  // covariance EMA retention
  bool enabled = true;
};

// Diagonal per-class covariance of augmented codes: diag(c, d) >= 0.
template <typename S>
struct ClasswiseCovariance {
  MatX<S> diag;

  static ClasswiseCovariance zeros(int num_classes, int dim) {
    ClasswiseCovariance c;
    c.diag = MatX<S>::Zero(num_classes, dim);
    return c;
  }
  int num_classes() const { return static_cast<int>(diag.rows()); }
  int dim() const { return static_cast<int>(diag.cols()); }
};

// alpha ~ N(1, sigma^2), beta ~ N(0, sigma^2); alpha is drawn fully (row-major)
// before beta so draw order is part of the contract.
template <typename S>
void sample_scale_bias(Eigen::Index rows, Eigen::Index cols, S sigma, Rng& rng,
                       MatX<S>& alpha, MatX<S>& beta) {
  if (sigma < S(0)) {
    throw Error(ErrorCode::kInvalidConfig, "feature-aug sigma must be >= 0");
  }
  alpha.resize(rows, cols);
  beta.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      alpha(r, c) = static_cast<S>(rng.normal(1.0, sigma));
    }
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      beta(r, c) = static_cast<S>(rng.normal(0.0, sigma));
    }
  }
}

// Label-dependent jitter: eps(r, :) ~ N(0, diag(cov[labels[r]])). A standard
// normal is drawn for every entry regardless of the row's class, so one
// class's draw never depends on another class's covariance.
template <typename S>
MatX<S> sample_regularizer(const VecXi& labels,
                           const ClasswiseCovariance<S>& cov, Rng& rng) {
  MatX<S> eps(labels.size(), cov.dim());
  for (Eigen::Index r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= cov.num_classes()) {
      throw Error(ErrorCode::kInvalidArgument, "label outside covariance table");
    }
    for (Eigen::Index d = 0; d < eps.cols(); ++d) {
      const S sd = std::sqrt(std::max(S(0), cov.diag(y, d)));
      eps(r, d) = sd * static_cast<S>(rng.normal());
    }
  }
  return eps;
}

// z' = alpha .* z + beta + eps. Disabled => returns z untouched and consumes
// no randomness; alpha_out (the local dz'/dz) is all ones in that case.
template <typename S>
MatX<S> augment_features(const MatX<S>& z, const VecXi& labels,
                         const FeatAugConfig& cfg,
                         const ClasswiseCovariance<S>& cov, Rng& rng,
                         MatX<S>* alpha_out = nullptr) {
  if (z.rows() != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch, "codes/labels row mismatch");
  }
  if (!cfg.enabled) {
    if (alpha_out != nullptr) *alpha_out = MatX<S>::Ones(z.rows(), z.cols());
    return z;
  }
  if (z.cols() != cov.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "codes/covariance dim mismatch");
  }
  MatX<S> alpha, beta;
  sample_scale_bias(z.rows(), z.cols(), static_cast<S>(cfg.sigma), rng, alpha,
                    beta);
  const MatX<S> eps = sample_regularizer(labels, cov, rng);
  if (alpha_out != nullptr) *alpha_out = alpha;
  return alpha.cwiseProduct(z) + beta + eps;
}

// EMA update from the *augmented* codes: classes with at least two rows get
// diag_c <- lambda * diag_c + (1 - lambda) * unbiased per-dim variance;
// classes absent or singleton in the batch keep their entry unchanged.
template <typename S>
void update_class_covariance(ClasswiseCovariance<S>& cov, const MatX<S>& zprime,
                             const VecXi& labels, S lambda) {
  if (lambda < S(0) || lambda > S(1)) {
    throw Error(ErrorCode::kInvalidConfig, "lambda must lie in [0, 1]");
  }
  if (zprime.rows() != labels.size() || zprime.cols() != cov.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "codes/covariance shape mismatch");
  }
  for (int c = 0; c < cov.num_classes(); ++c) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 0; r < labels.size(); ++r) {
      if (labels[r] == c) rows.push_back(r);
    }
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (m < 2) continue;
    VecX<S> mean = VecX<S>::Zero(zprime.cols());
    for (Eigen::Index r : rows) mean += zprime.row(r).transpose();
    mean /= static_cast<S>(m);
    VecX<S> var = VecX<S>::Zero(zprime.cols());
    for (Eigen::Index r : rows) {
      var += (zprime.row(r).transpose() - mean).cwiseAbs2();
    }
    var /= static_cast<S>(m - 1);
    cov.diag.row(c) =
        lambda * cov.diag.row(c) + (S(1) - lambda) * var.transpose();
  }
}

}  // namespace airfi

#endif  // AIRFI_FEAT_AUGMENT_HPP
