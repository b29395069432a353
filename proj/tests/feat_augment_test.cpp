#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "airfi/feat_augment.hpp"
#include "airfi/rng.hpp"

#include <cmath>

using namespace airfi;

namespace {

FeatAugConfig cfg_with(float sigma, float lambda = 0.9f, bool enabled = true) {
  FeatAugConfig c;
  c.sigma = sigma;
  c.lambda = lambda;
  c.enabled = enabled;
  return c;
}

}  // namespace

TEST_CASE("sigma 0 with zero covariance is the identity") {
  Rng rng(1);
  MatXd z(3, 4);
  z.setRandom();
  VecXi labels(3);
  labels << 0, 1, 0;
  auto cov = ClasswiseCovariance<double>::zeros(2, 4);

  MatXd alpha;
  MatXd zp = augment_features<double>(z, labels, cfg_with(0.0f), cov, rng, &alpha);
  CHECK(zp == z);  // alpha = 1, beta = 0, eps = 0 exactly
  CHECK(alpha == MatXd::Ones(3, 4));
}

TEST_CASE("disabled augmentation passes codes through and draws nothing") {
  Rng rng(2);
  Rng clone(2);
  MatXd z(2, 3);
  z.setRandom();
  VecXi labels(2);
  labels << 0, 0;
  auto cov = ClasswiseCovariance<double>::zeros(1, 3);

  MatXd alpha;
  MatXd zp = augment_features<double>(z, labels, cfg_with(0.5f, 0.9f, false),
                                      cov, rng, &alpha);
  CHECK(zp == z);
  CHECK(alpha == MatXd::Ones(2, 3));
  // No randomness consumed: the next draw matches a fresh stream.
  CHECK(rng.next_u64() == clone.next_u64());
}

TEST_CASE("scale/bias draws are row-major, alpha before beta") {
  Rng rng(3);
  MatXd alpha, beta;
  sample_scale_bias<double>(2, 3, 0.25, rng, alpha, beta);

  Rng clone(3);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) CHECK(alpha(r, c) == clone.normal(1.0, 0.25));
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) CHECK(beta(r, c) == clone.normal(0.0, 0.25));
  }
}

TEST_CASE("augmented moments match sigma and the class covariance") {
  const int n = 400, d = 50;
  const double sigma = 0.1;
  auto cov = ClasswiseCovariance<double>::zeros(1, d);
  cov.diag.row(0).setConstant(0.25);
  VecXi labels = VecXi::Zero(n);

  // z = 0: z' = beta + eps, variance sigma^2 + 0.25.
  Rng rng(5);
  MatXd zero = MatXd::Zero(n, d);
  MatXd zp = augment_features<double>(zero, labels, cfg_with(0.1f), cov, rng);
  double mean = zp.mean();
  double var = (zp.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(sigma * sigma + 0.25).epsilon(0.05));

  // z = 1: z' = alpha + beta + eps, mean 1, variance 2 sigma^2 + 0.25.
  Rng rng2(7);
  MatXd ones = MatXd::Ones(n, d);
  MatXd zp2 = augment_features<double>(ones, labels, cfg_with(0.1f), cov, rng2);
  double mean2 = zp2.mean();
  double var2 = (zp2.array() - mean2).square().mean();
  CHECK(mean2 == doctest::Approx(1.0).epsilon(0.01));
  CHECK(var2 == doctest::Approx(2 * sigma * sigma + 0.25).epsilon(0.05));
}

TEST_CASE("regularizer rows draw from their own class only") {
  auto cov = ClasswiseCovariance<double>::zeros(2, 3);
  cov.diag.row(0).setConstant(0.0);
  cov.diag.row(1).setConstant(4.0);
  VecXi labels(4);
  labels << 0, 1, 0, 1;

  Rng rng(11);
  MatXd eps = sample_regularizer<double>(labels, cov, rng);
  CHECK(eps.row(0).cwiseAbs().maxCoeff() == 0.0);  // sd 0 => exactly zero
  CHECK(eps.row(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(eps.row(1).cwiseAbs().maxCoeff() > 0.0);
  CHECK(eps.row(3).cwiseAbs().maxCoeff() > 0.0);

  // A standard normal is consumed per entry regardless of class, so editing
  // class 1's covariance must not move class 0's (zero) rows or reorder the
  // stream feeding later rows.
  auto cov2 = cov;
  cov2.diag.row(1).setConstant(9.0);
  Rng rng2(11);
  MatXd eps2 = sample_regularizer<double>(labels, cov2, rng2);
  CHECK(eps2.row(0) == eps.row(0));
  CHECK(eps2.row(2) == eps.row(2));
  // Scaled by sqrt(9)/sqrt(4) = 1.5, entry for entry.
  CHECK((eps2.row(1) - 1.5 * eps.row(1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance EMA update on a hand-built two-row batch") {
  // Rows +/- x per dim give unbiased variance (2x)^2 / 2 = 2 x^2.
  const double x0 = std::sqrt(3.0 / 2.0);  // variance 3 in dim 0
  const double x1 = std::sqrt(5.0 / 2.0);  // variance 5 in dim 1
  MatXd zp(2, 2);
  zp << x0, x1, -x0, -x1;
  VecXi labels(2);
  labels << 0, 0;

  auto cov = ClasswiseCovariance<double>::zeros(1, 2);
  cov.diag.row(0).setConstant(1.0);
  update_class_covariance<double>(cov, zp, labels, 0.9);
  CHECK(cov.diag(0, 0) == doctest::Approx(0.9 * 1.0 + 0.1 * 3.0).epsilon(1e-12));
  CHECK(cov.diag(0, 1) == doctest::Approx(0.9 * 1.0 + 0.1 * 5.0).epsilon(1e-12));
}

TEST_CASE("absent and singleton classes keep their covariance rows") {
  auto cov = ClasswiseCovariance<double>::zeros(3, 2);
  cov.diag << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  MatXd zp(3, 2);
  zp << 1.0, 0.0, -1.0, 0.0, 7.0, 7.0;
  VecXi labels(3);
  labels << 0, 0, 1;  // class 1 singleton, class 2 absent

  auto before = cov.diag;
  update_class_covariance<double>(cov, zp, labels, 0.5);
  CHECK(cov.diag(0, 0) == doctest::Approx(0.5 * 1.0 + 0.5 * 2.0));  // var 2
  CHECK(cov.diag.row(1) == before.row(1));
  CHECK(cov.diag.row(2) == before.row(2));
}

TEST_CASE("repeated updates converge to the true diagonal") {
  // Feed batches drawn from N(0, diag(v)); after 500 EMA steps at
  // lambda = 0.9 the table should sit within 5% of v.
  const int m = 256, d = 4;
  VecXd v(d);
  v << 0.5, 1.0, 2.0, 3.0;
  auto cov = ClasswiseCovariance<double>::zeros(1, d);
  VecXi labels = VecXi::Zero(m);
  Rng rng(13);
  MatXd batch(m, d);
  for (int step = 0; step < 500; ++step) {
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < d; ++c) {
        batch(r, c) = rng.normal(0.0, std::sqrt(v[c]));
      }
    }
    update_class_covariance<double>(cov, batch, labels, 0.9);
  }
  for (int c = 0; c < d; ++c) {
    CHECK(cov.diag(0, c) == doctest::Approx(v[c]).epsilon(0.05));
  }
}

TEST_CASE("error taxonomy") {
  Rng rng(17);
  MatXd z(2, 3);
  z.setZero();
  VecXi labels(2);
  labels << 0, 0;
  auto cov = ClasswiseCovariance<double>::zeros(1, 3);

  MatXd alpha, beta;
  CHECK_THROWS_AS(sample_scale_bias<double>(2, 3, -0.1, rng, alpha, beta),
                  Error);

  VecXi bad_label(2);
  bad_label << 0, 5;
  try {
    sample_regularizer<double>(bad_label, cov, rng);
    FAIL("expected invalid_argument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }

  VecXi short_labels(1);
  short_labels << 0;
  CHECK_THROWS_AS(
      augment_features<double>(z, short_labels, cfg_with(0.1f), cov, rng),
      Error);

  auto narrow = ClasswiseCovariance<double>::zeros(1, 2);
  CHECK_THROWS_AS(augment_features<double>(z, labels, cfg_with(0.1f), narrow, rng),
                  Error);

  CHECK_THROWS_AS(update_class_covariance<double>(cov, z, labels, 1.5), Error);
  MatXd wrong(2, 2);
  wrong.setZero();
  CHECK_THROWS_AS(update_class_covariance<double>(cov, wrong, labels, 0.9),
                  Error);
}
