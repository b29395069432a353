#ifndef AIRFI_NN_LOSSES_HPP
#define AIRFI_NN_LOSSES_HPP

#include "airfi/nn/layers.hpp"

#include <cmath>

namespace airfi {

// Probability floor/ceiling keeping every log() in the losses finite.
inline constexpr double kProbClamp = 1e-7;
inline constexpr double kCeClamp = 1e-9;

template <typename S>
MatX<S> sigmoid(const MatX<S>& logits) {
  return logits.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
}

// Discriminator output: clamped sigmoid, so log D and log(1 - D) stay finite
// for any parameter values.
template <typename S>
MatX<S> disc_probs(const MatX<S>& logits) {
  const S lo = static_cast<S>(kProbClamp);
  const S hi = S(1) - static_cast<S>(kProbClamp);
  return sigmoid(logits).cwiseMax(lo).cwiseMin(hi);
}

// E[log D(h)] + E[log(1 - D(Q(x)))] on clamped probabilities; the quantity
// the discriminator ascends.
template <typename S>
S adversarial_loss(const MatX<S>& prior_probs, const MatX<S>& code_probs) {
  if (prior_probs.size() == 0 || code_probs.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty adversarial batch");
  }
  const S a = prior_probs.array().log().mean();
  const S b = (S(1) - code_probs.array()).log().mean();
  return a + b;
}

template <typename S>
MatX<S> softmax_rows(const MatX<S>& logits) {
  MatX<S> p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const S mx = logits.row(r).maxCoeff();
    VecX<S> e = (logits.row(r).array() - mx).exp().transpose();
    p.row(r) = (e / e.sum()).transpose();
  }
  return p;
}

// Mean negative log-likelihood of the true class; probabilities are clamped
// from below so the value is always finite.
template <typename S>
S cross_entropy(const MatX<S>& probs, const VecXi& labels) {
  if (probs.rows() != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch, "probs/labels row mismatch");
  }
  S total = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= probs.cols()) {
      throw Error(ErrorCode::kInvalidArgument, "label out of range");
    }
    total += -std::log(std::max(probs(r, y), static_cast<S>(kCeClamp)));
  }
  return total / static_cast<S>(probs.rows());
}

// Mean-per-sample squared reconstruction error over one domain's batch.
template <typename S>
S reconstruction_loss(const ConvBatch<S>& xhat, const ConvBatch<S>& x) {
  if (xhat.data.rows() != x.data.rows() || xhat.data.cols() != x.data.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "reconstruction shape mismatch");
  }
  if (x.batch == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty reconstruction batch");
  }
  return (xhat.data - x.data).squaredNorm() / static_cast<S>(x.batch);
}

}  // namespace airfi

#endif  // AIRFI_NN_LOSSES_HPP
