#ifndef AIRFI_MMD_HPP
#define AIRFI_MMD_HPP

#include "airfi/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace airfi {

// Feature codes of one domain: rows are samples, columns latent dimensions.
template <typename S>
struct DomainFeatureSet {
  MatX<S> codes;
  int env_id = 0;
};

template <typename S>
S rbf_kernel(const VecX<S>& a, const VecX<S>& b, S gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

// Gram matrix K(i, j) = exp(-gamma * ||A_i - B_j||^2), rows of A / B are
// samples. Squared distances are clamped at 0 to absorb cancellation.
template <typename S>
MatX<S> rbf_gram(const MatX<S>& A, const MatX<S>& B, S gamma) {
  const VecX<S> sqa = A.rowwise().squaredNorm();
  const VecX<S> sqb = B.rowwise().squaredNorm();
  MatX<S> d2 = (-2 * A * B.transpose()).eval();
  d2.colwise() += sqa;
  d2.rowwise() += sqb.transpose();
  return d2.array().max(S(0)).unaryExpr(
      [gamma](S v) { return std::exp(-gamma * v); });
}

// Biased V-statistic estimate of squared MMD (diagonal terms included).
template <typename S>
S mmd_sq(const MatX<S>& A, const MatX<S>& B, S gamma) {
  if (A.rows() == 0 || B.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "MMD of an empty feature set");
  }
  if (A.cols() != B.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "feature dims differ");
  }
  const S kxx = rbf_gram<S>(A, A, gamma).mean();
  const S kyy = rbf_gram<S>(B, B, gamma).mean();
  const S kxy = rbf_gram<S>(A, B, gamma).mean();
  return kxx + kyy - 2 * kxy;
}

template <typename S>
S mmd(const MatX<S>& A, const MatX<S>& B, S gamma) {
  return std::sqrt(std::max(S(0), mmd_sq<S>(A, B, gamma)));
}

// Multi-domain alignment loss: (1/N^2) * sum_{i,j} MMD(Z_i, Z_j). The
// diagonal vanishes and the off-diagonal is symmetric, so each unordered pair
// is counted twice.
template <typename S>
S mmd_loss(const std::vector<MatX<S>>& domains, S gamma) {
  const std::size_t n = domains.size();
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no domains");
  }
  S total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += 2 * mmd<S>(domains[i], domains[j], gamma);
    }
  }
  return total / static_cast<S>(n * n);
}

// Squared MMD of one (X, Y) pair together with its gradient w.r.t. both code
// matrices. d/dX of the V-statistic is
//   (-4g/m^2) (diag(Kxx 1) X - Kxx X) + (4g/(m n)) (diag(Kxy 1) X - Kxy Y),
// and symmetrically for Y. Pass nullptr to skip either gradient.
template <typename S>
S mmd_sq_pair_grad(const MatX<S>& X, const MatX<S>& Y, S gamma, MatX<S>* dx,
                   MatX<S>* dy) {
  if (X.rows() == 0 || Y.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "MMD of an empty feature set");
  }
  if (X.cols() != Y.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "feature dims differ");
  }
  const S m = static_cast<S>(X.rows());
  const S q = static_cast<S>(Y.rows());
  const MatX<S> kxx = rbf_gram<S>(X, X, gamma);
  const MatX<S> kyy = rbf_gram<S>(Y, Y, gamma);
  const MatX<S> kxy = rbf_gram<S>(X, Y, gamma);
  const S v = kxx.mean() + kyy.mean() - 2 * kxy.mean();
  if (dx != nullptr) {
    const VecX<S> rx = kxx.rowwise().sum();
    const VecX<S> rxy = kxy.rowwise().sum();
    *dx = (-4 * gamma / (m * m)) * (rx.asDiagonal() * X - kxx * X) +
          (4 * gamma / (m * q)) * (rxy.asDiagonal() * X - kxy * Y);
  }
  if (dy != nullptr) {
    const VecX<S> ry = kyy.rowwise().sum();
    const VecX<S> ryx = kxy.colwise().sum().transpose();
    *dy = (-4 * gamma / (q * q)) * (ry.asDiagonal() * Y - kyy * Y) +
          (4 * gamma / (m * q)) * (ryx.asDiagonal() * Y - kxy.transpose() * X);
  }
  return v;
}

// Squared-MMD variant of the alignment loss together with its gradient with
// respect to every domain's codes. The squared form is what training descends
// on; mmd_loss above is what gets reported.
template <typename S>
S mmd_sq_loss_with_grad(const std::vector<MatX<S>>& domains, S gamma,
                        std::vector<MatX<S>>* grads) {
  const std::size_t n = domains.size();
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no domains");
  }
  if (grads != nullptr) {
    grads->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      (*grads)[i] = MatX<S>::Zero(domains[i].rows(), domains[i].cols());
    }
  }
  const S inv_n2 = S(1) / static_cast<S>(n * n);
  S total = 0;
  MatX<S> dx, dy;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const S v = mmd_sq_pair_grad<S>(domains[i], domains[j], gamma,
                                      grads != nullptr ? &dx : nullptr,
                                      grads != nullptr ? &dy : nullptr);
      // Ordered pairs (i,j) and (j,i) contribute identically: factor 2.
      total += 2 * v;
      if (grads != nullptr) {
        (*grads)[i] += (2 * inv_n2) * dx;
        (*grads)[j] += (2 * inv_n2) * dy;
      }
    }
  }
  return total * inv_n2;
}

// Checks the bound "mean RKHS deviation of domain means from their barycenter
// is at most the pairwise MMD loss". Returns {lhs, rhs}; lhs <= rhs + eps must
// hold, with equality at N == 2. Inner products of mean embeddings reduce to
// means of cross-domain kernel blocks.
template <typename S>
std::pair<S, S> domain_variance_bound(const std::vector<MatX<S>>& domains,
                                      S gamma) {
  const std::size_t n = domains.size();
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no domains");
  }
  MatX<S> g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      g(i, j) = rbf_gram<S>(domains[i], domains[j], gamma).mean();
      g(j, i) = g(i, j);
    }
  }
  const S gbar = g.mean();
  S lhs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const S dev2 =
        g(i, i) - 2 * g.row(i).mean() + gbar;  // ||mu_i - mu_bar||^2
    lhs += std::sqrt(std::max(S(0), dev2));
  }
  lhs /= static_cast<S>(n);
  return {lhs, mmd_loss<S>(domains, gamma)};
}

// gamma = 1 / (2 * median^2) over pairwise distances of (up to 1000,
// deterministically strided) rows; falls back to 1 when degenerate.
template <typename S>
S median_heuristic_gamma(const MatX<S>& rows) {
  const Eigen::Index n = rows.rows();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "median heuristic needs at least 2 rows");
  }

  constexpr Eigen::Index kMaxRows = 1000;
  MatX<S> sub;
  const MatX<S>* use = &rows;
  if (n > kMaxRows) {
    sub.resize(kMaxRows, rows.cols());
    for (Eigen::Index i = 0; i < kMaxRows; ++i) {
      sub.row(i) = rows.row(i * n / kMaxRows);
    }
    use = &sub;
  }
  const Eigen::Index m = use->rows();
  std::vector<S> dist;
  dist.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      dist.push_back(std::sqrt((use->row(i) - use->row(j)).squaredNorm()));
    }
  }
  std::sort(dist.begin(), dist.end());
  const std::size_t half = dist.size() / 2;
  const S med = dist.size() % 2 == 1
                    ? dist[half]
                    : (dist[half - 1] + dist[half]) / S(2);
  if (!(med > S(0))) return S(1);
  return S(1) / (2 * med * med);
}

}  // namespace airfi

#endif  // AIRFI_MMD_HPP
