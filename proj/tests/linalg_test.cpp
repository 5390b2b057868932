#include "hda/linalg.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hda/error.hpp"

using namespace hda;
using namespace hda::linalg;

namespace {

Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

Mat random_symmetric(std::mt19937_64& rng, Eigen::Index d) {
  const Mat b = random_matrix(rng, d, d);
  return 0.5 * (b + b.transpose());
}

// Direct double loop: sum_i (x_i - mu)(x_i - mu)^T / (n - 1).
Mat brute_force_covariance(const Mat& X) {
  const Eigen::Index n = X.rows(), d = X.cols();
  std::vector<double> mu(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) mu[static_cast<std::size_t>(j)] += X(i, j);
    mu[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  }
  Mat C = Mat::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        s += (X(i, a) - mu[static_cast<std::size_t>(a)]) * (X(i, b) - mu[static_cast<std::size_t>(b)]);
      C(a, b) = s / static_cast<double>(n - 1);
    }
  return C;
}

double inf_norm(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Covariance, IdenticalRowsGiveZero) {
  Mat X(2, 3);
  X << 1, 2, 3, 1, 2, 3;
  EXPECT_LT(inf_norm(covariance(X)), 1e-15);
}

TEST(Covariance, SingleAxisSpread) {
  Mat X(2, 2);
  X << 0, 0, 2, 0;
  Mat expected(2, 2);
  expected << 2, 0, 0, 0;
  EXPECT_LT(inf_norm(covariance(X) - expected), 1e-15);
}

TEST(Covariance, MatchesBruteForce) {
  std::mt19937_64 rng(7);
  const Mat X = random_matrix(rng, 50, 4);
  EXPECT_LT(inf_norm(covariance(X) - brute_force_covariance(X)), 1e-12);
}

TEST(Covariance, CenteredFlagSkipsMeanRemoval) {
  std::mt19937_64 rng(8);
  Mat X = random_matrix(rng, 30, 3);
  X = X.rowwise() - X.colwise().mean();
  EXPECT_LT(inf_norm(covariance(X, true) - covariance(X, false)), 1e-12);
}

TEST(Covariance, RowPermutationInvariant) {
  std::mt19937_64 rng(9);
  const Mat X = random_matrix(rng, 40, 5);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Mat P(40, 5);
  for (int i = 0; i < 40; ++i) P.row(i) = X.row(perm[static_cast<std::size_t>(i)]);
  EXPECT_LT(inf_norm(covariance(X) - covariance(P)), 1e-12);
}

TEST(Covariance, RejectsSingleSample) {
  Mat X(1, 3);
  X << 1, 2, 3;
  try {
    covariance(X);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(SymEig, DiagonalCase) {
  Mat A = Mat::Zero(3, 3);
  A.diagonal() << 3, 1, 2;
  const SymEig e = sym_eig(A);
  EXPECT_NEAR(e.values(0), 3, 1e-14);
  EXPECT_NEAR(e.values(1), 2, 1e-14);
  EXPECT_NEAR(e.values(2), 1, 1e-14);
  Mat expected = Mat::Zero(3, 3);
  expected(0, 0) = 1;
  expected(2, 1) = 1;
  expected(1, 2) = 1;
  EXPECT_LT(inf_norm(e.vectors - expected), 1e-14);
}

TEST(SymEig, IdentityReconstructs) {
  const Mat I = Mat::Identity(4, 4);
  const SymEig e = sym_eig(I);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(e.values(i), 1.0, 1e-14);
  EXPECT_LT(inf_norm(e.vectors * e.values.asDiagonal() * e.vectors.transpose() - I), 1e-12);
}

TEST(SymEig, RandomReconstructionAndOrthonormality) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat A = random_symmetric(rng, 6);
    const SymEig e = sym_eig(A);
    EXPECT_LE(inf_norm(e.vectors * e.values.asDiagonal() * e.vectors.transpose() - A), 1e-8);
    EXPECT_LE(inf_norm(e.vectors.transpose() * e.vectors - Mat::Identity(6, 6)), 1e-8);
    for (int i = 0; i + 1 < 6; ++i) EXPECT_GE(e.values(i), e.values(i + 1));
  }
}

TEST(SymEig, TraceAndDeterminant) {
  std::mt19937_64 rng(12);
  const Mat B = random_matrix(rng, 5, 5);
  const Mat A = B * B.transpose() + Mat::Identity(5, 5);
  const SymEig e = sym_eig(A);
  EXPECT_NEAR(e.values.sum(), A.trace(), 1e-8);
  const double det = A.determinant();
  EXPECT_NEAR(e.values.prod() / det, 1.0, 1e-6);
}

TEST(SymEig, SignConventionFirstNonzeroPositive) {
  std::mt19937_64 rng(13);
  const SymEig e = sym_eig(random_symmetric(rng, 5));
  for (Eigen::Index k = 0; k < 5; ++k) {
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (std::abs(e.vectors(i, k)) > 1e-12) {
        EXPECT_GT(e.vectors(i, k), 0.0);
        break;
      }
    }
  }
}

TEST(SymEig, RejectsNonSymmetric) {
  Mat A(2, 2);
  A << 1, 2, 0, 1;
  try {
    sym_eig(A);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract);
  }
}

TEST(Cholesky, Identity) { EXPECT_LT(inf_norm(cholesky(Mat::Identity(3, 3)) - Mat::Identity(3, 3)), 1e-15); }

TEST(Cholesky, HandChecked2x2) {
  Mat A(2, 2);
  A << 4, 2, 2, 3;
  Mat expected(2, 2);
  expected << 2, 0, 1, std::sqrt(2.0);
  EXPECT_LT(inf_norm(cholesky(A) - expected), 1e-15);
}

TEST(Cholesky, RandomSpdReconstruction) {
  std::mt19937_64 rng(14);
  const Mat B = random_matrix(rng, 8, 8);
  const Mat A = B * B.transpose() + Mat::Identity(8, 8);
  const Mat L = cholesky(A);
  EXPECT_LE(inf_norm(L * L.transpose() - A), 1e-8);
  EXPECT_LT(inf_norm(L.triangularView<Eigen::StrictlyUpper>().toDenseMatrix()), 1e-300);
}

TEST(Cholesky, RecoversFactorWithPositiveDiagonal) {
  std::mt19937_64 rng(15);
  Mat L = random_matrix(rng, 5, 5).triangularView<Eigen::Lower>();
  for (int i = 0; i < 5; ++i) L(i, i) = std::abs(L(i, i)) + 0.5;
  EXPECT_LT(inf_norm(cholesky(L * L.transpose()) - L), 1e-10);
}

TEST(Cholesky, RejectsIndefinite) {
  Mat A(2, 2);
  A << 1, 2, 2, 1;
  try {
    cholesky(A);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
  }
}

TEST(SqrtmPsd, IdentityAndDiagonal) {
  EXPECT_LT(inf_norm(sqrtm_psd(Mat::Identity(3, 3)) - Mat::Identity(3, 3)), 1e-14);
  Mat D = Mat::Zero(2, 2);
  D.diagonal() << 4, 9;
  Mat expected = Mat::Zero(2, 2);
  expected.diagonal() << 2, 3;
  EXPECT_LT(inf_norm(sqrtm_psd(D) - expected), 1e-14);
}

TEST(SqrtmPsd, RandomPsdSquares) {
  std::mt19937_64 rng(16);
  const Mat B = random_matrix(rng, 5, 3);  // rank-deficient PSD
  const Mat A = B * B.transpose();
  const Mat S = sqrtm_psd(A);
  EXPECT_LE(inf_norm(S * S - A), 1e-6);
  EXPECT_LE(asymmetry(S), 1e-12);
  EXPECT_GE(sym_eig(S).values.minCoeff(), -1e-7);
}

TEST(SqrtmPsd, RejectsNegativeEigenvalue) {
  Mat A = Mat::Zero(2, 2);
  A.diagonal() << 1, -1;
  try {
    sqrtm_psd(A);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
  }
}

TEST(RegularizeSpd, LeavesWellConditionedUntouchedAndFloorsSingular) {
  Mat A = Mat::Identity(3, 3);
  EXPECT_EQ(regularize_spd(A), A);
  Mat S = Mat::Zero(2, 2);
  S << 1, 1, 1, 1;  // rank one
  const Mat R = regularize_spd(S);
  const SymEig e = sym_eig(R);
  EXPECT_NEAR(e.values(1), 1e-6 * 1.0, 1e-12);
  EXPECT_NO_THROW(cholesky(R));
}
