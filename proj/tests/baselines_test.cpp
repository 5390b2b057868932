#include "hda/baselines.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hda/datasets.hpp"
#include "hda/error.hpp"

using namespace hda;
using namespace hda::baselines;

namespace {

Mat gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

Mat invertible(std::mt19937_64& rng, Eigen::Index d) {
  return gaussian(rng, d, d) + 3.0 * Mat::Identity(d, d);
}

double rel_frobenius(const Mat& a, const Mat& b) { return (a - b).norm() / b.norm(); }

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no hda::Error thrown";
  return ErrorKind::usage;
}

}  // namespace

// --- PCA ---------------------------------------------------------------------

TEST(Pca, CollinearData) {
  Mat X(50, 2);
  for (int i = 0; i < 50; ++i) X(i, 0) = X(i, 1) = 0.1 * i - 2.0;
  const SubspaceModel m = pca_fit(X, 1);
  EXPECT_NEAR(std::abs(m.source_projection(0, 0)), 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(m.source_projection(0, 0), m.source_projection(1, 0), 1e-9);
  EXPECT_NEAR(m.ratios(0), 1.0, 1e-9);
}

TEST(Pca, IsotropicRatiosAreUniform) {
  std::mt19937_64 rng(1);
  const Mat X = gaussian(rng, 10000, 4);
  const Vec r = explained_variance_ratios(X);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(r(i), 0.25, 0.05);
}

TEST(Pca, ProjectionsAreDecorrelatedAndDescending) {
  std::mt19937_64 rng(2);
  const Mat X = gaussian(rng, 500, 6) * invertible(rng, 6);
  const SubspaceModel m = pca_fit(X, 4);
  const Mat C = linalg::covariance(project(m, X, Side::source));
  for (int i = 0; i < 4; ++i) {
    if (i > 0) EXPECT_GE(C(i - 1, i - 1), C(i, i));
    for (int j = 0; j < 4; ++j)
      if (i != j) EXPECT_LE(std::abs(C(i, j)), 1e-8);
  }
  for (int i = 1; i < 4; ++i) EXPECT_GE(m.ratios(i - 1), m.ratios(i));
}

TEST(Pca, TrainingMeanProjectsToZero) {
  std::mt19937_64 rng(3);
  const Mat X = gaussian(rng, 100, 5).array() + 4.0;
  const SubspaceModel m = pca_fit(X, 3);
  const Mat z = project(m, linalg::column_means(X).transpose(), Side::source);
  EXPECT_LE(z.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, ReconstructionLeavesUncoveredVariance) {
  // Sum of squared residuals / total sum of squares equals 1 - coverage.
  std::mt19937_64 rng(4);
  const Mat X = gaussian(rng, 400, 6) * invertible(rng, 6);
  const SubspaceModel m = pca_fit(X, 3);
  const Mat R = X - reconstruct(m, project(m, X, Side::source));
  const Mat Xc = X.rowwise() - linalg::column_means(X).transpose();
  EXPECT_NEAR(R.squaredNorm() / Xc.squaredNorm(), 1.0 - m.ratios.sum(), 1e-9);
}

TEST(Pca, KBeyondDimensionIsAnError) {
  std::mt19937_64 rng(5);
  const Mat X = gaussian(rng, 20, 3);
  EXPECT_EQ(kind_of([&] { pca_fit(X, 4); }), ErrorKind::contract);
  EXPECT_EQ(kind_of([&] { pca_fit(X, 0); }), ErrorKind::contract);
}

TEST(Pca, SyntheticSourceNeedsFewComponentsForNinetyFivePercent) {
  data::GeneratorConfig g;
  g.source_samples = 200;
  g.target_samples = 120;
  g.seed = 3;
  const auto pair = data::generate_pair(g);
  const auto src = data::preprocess(pair.source);
  const Mat rows = time_steps_as_rows(data::to_tensor(src));
  const Vec r = explained_variance_ratios(rows);
  const std::size_t k = select_k_by_variance(std::span<const double>(r.data(), r.size()), 0.95);
  EXPECT_LE(k, 10u);
  EXPECT_GE(pca_fit(rows, k).ratios.sum(), 0.95 - 1e-12);
}

TEST(SelectK, Examples) {
  const std::vector<double> r = {0.6, 0.3, 0.1};
  EXPECT_EQ(select_k_by_variance(r, 0.9), 2u);
  EXPECT_EQ(select_k_by_variance(r, 0.0), 1u);
  EXPECT_EQ(select_k_by_variance(r, 1.0), 3u);
  const std::vector<double> partial = {0.5, 0.2};
  EXPECT_EQ(kind_of([&] { select_k_by_variance(partial, 0.8); }), ErrorKind::contract);
  const std::vector<double> ascending = {0.2, 0.5};
  EXPECT_EQ(kind_of([&] { select_k_by_variance(ascending, 0.5); }), ErrorKind::contract);
}

// --- CORAL -------------------------------------------------------------------

TEST(Coral, EqualCovariancesGiveIdentity) {
  std::mt19937_64 rng(6);
  const Mat S = gaussian(rng, 300, 6) * invertible(rng, 6);
  const CoralResult r = coral_align(S, S);
  EXPECT_LE((r.A - Mat::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((r.aligned - S).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Coral, ScalarWhitenRecolor) {
  // Variance 4 -> 9: A = 3 / 2.
  Mat S(4, 1), T(4, 1);
  S << -2, 2, -2, 2;  // sample variance 16/3
  T << -3, 3, -3, 3;  // 36/3
  S *= std::sqrt(3.0) / 2.0;
  T *= std::sqrt(3.0) / 2.0;
  ASSERT_NEAR(linalg::covariance(S)(0, 0), 4.0, 1e-12);
  ASSERT_NEAR(linalg::covariance(T)(0, 0), 9.0, 1e-12);
  EXPECT_NEAR(coral_align(S, T).A(0, 0), 1.5, 1e-12);
}

TEST(Coral, RandomGaussiansMatchTargetCovariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat S = gaussian(rng, 200, 6) * invertible(rng, 6);
    const Mat T = gaussian(rng, 150, 6) * invertible(rng, 6);
    const CoralResult r = coral_align(S, T);
    EXPECT_LE(rel_frobenius(linalg::covariance(r.aligned), linalg::covariance(T)), 1e-6);
    EXPECT_LE((linalg::column_means(r.aligned) - linalg::column_means(T)).norm(), 1e-9);
  }
}

TEST(Coral, ClosedFormMinimizesCovarianceGapAlongScaleFamily) {
  // Brute-force scan of A(a) = a * A over a grid; the minimizer of
  // |A^T C_S A - C_T|_F must be a = 1.
  std::mt19937_64 rng(8);
  const Mat S = gaussian(rng, 200, 6) * invertible(rng, 6);
  const Mat T = gaussian(rng, 200, 6) * invertible(rng, 6);
  const Mat cs = linalg::covariance(S), ct = linalg::covariance(T);
  const Mat A = coral_align(S, T).A;
  double best = 0.0, best_gap = 1e300;
  for (int i = 50; i <= 150; ++i) {
    const double a = i / 100.0;
    const double gap = ((a * A).transpose() * cs * (a * A) - ct).norm();
    if (gap < best_gap) {
      best_gap = gap;
      best = a;
    }
  }
  EXPECT_DOUBLE_EQ(best, 1.0);
  EXPECT_LE(best_gap / ct.norm(), 1e-6);
}

TEST(Coral, SecondApplicationIsIdempotent) {
  std::mt19937_64 rng(9);
  const Mat S = gaussian(rng, 200, 4) * invertible(rng, 4);
  const Mat T = gaussian(rng, 200, 4) * invertible(rng, 4);
  const Mat once = coral_align(S, T).aligned;
  const CoralResult twice = coral_align(once, T);
  EXPECT_LE((twice.A - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((twice.aligned - once).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Coral, DimensionMismatchAndConstantInputsAreErrors) {
  std::mt19937_64 rng(10);
  EXPECT_EQ(kind_of([&] { coral_align(gaussian(rng, 10, 3), gaussian(rng, 10, 4)); }), ErrorKind::shape);
  EXPECT_EQ(kind_of([&] { coral_align(Mat::Ones(10, 3), gaussian(rng, 10, 3)); }), ErrorKind::numeric);
}

// --- CCA ---------------------------------------------------------------------

TEST(Cca, IdenticalViewsCorrelatePerfectly) {
  std::mt19937_64 rng(11);
  const Mat S = gaussian(rng, 300, 5) * invertible(rng, 5);
  const SubspaceModel m = cca_fit(S, S, 5);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(m.ratios(i), 1.0, 1e-6);
  EXPECT_LE((project(m, S, Side::source) - project(m, S, Side::target)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Cca, IndependentViewsAreUncorrelated) {
  std::mt19937_64 rng(12);
  const SubspaceModel m = cca_fit(gaussian(rng, 10000, 5), gaussian(rng, 10000, 5), 5);
  EXPECT_LE(m.ratios(0), 0.1);
}

TEST(Cca, LinearlyRelatedViewsCorrelate) {
  std::mt19937_64 rng(13);
  const Mat S = gaussian(rng, 1000, 4);
  std::normal_distribution<double> noise(0.0, 0.01);
  Mat T = S * gaussian(rng, 4, 6);
  for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] += noise(rng);
  const SubspaceModel m = cca_fit(S, T, 4);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_GE(m.ratios(i), 0.99);
}

TEST(Cca, ConstraintsAndDiagonalCrossCorrelation) {
  std::mt19937_64 rng(14);
  const Mat Z = gaussian(rng, 800, 3);
  const Mat S = Z * gaussian(rng, 3, 5) + 0.5 * gaussian(rng, 800, 5);
  const Mat T = Z * gaussian(rng, 3, 4) + 0.5 * gaussian(rng, 800, 4);
  const SubspaceModel m = cca_fit(S, T, 4);
  const Mat a = project(m, S, Side::source), b = project(m, T, Side::target);
  const Mat ca = linalg::covariance(a), cb = linalg::covariance(b), cab = linalg::cross_covariance(a, b);
  EXPECT_LE((ca - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((cb - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(cab(i, i), m.ratios(i), 1e-6);
    if (i > 0) EXPECT_GE(m.ratios(i - 1), m.ratios(i));
    for (int j = 0; j < 4; ++j)
      if (i != j) EXPECT_LE(std::abs(cab(i, j)), 1e-6);
  }
  // w_S' C_SS w_S = 1, checked on the raw weights as well.
  const Mat css = linalg::covariance(S);
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(m.source_projection.col(i).dot(css * m.source_projection.col(i)), 1.0, 1e-6);
}

TEST(Cca, InvariantUnderReparameterization) {
  std::mt19937_64 rng(15);
  const Mat Z = gaussian(rng, 600, 3);
  const Mat S = Z * gaussian(rng, 3, 4) + 0.3 * gaussian(rng, 600, 4);
  const Mat T = Z * gaussian(rng, 3, 5) + 0.3 * gaussian(rng, 600, 5);
  const Vec before = cca_fit(S, T, 4).ratios;
  const Vec after = cca_fit(S, T * invertible(rng, 5), 4).ratios;
  EXPECT_LE((before - after).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Cca, ErrorCases) {
  std::mt19937_64 rng(16);
  EXPECT_EQ(kind_of([&] { cca_fit(gaussian(rng, 10, 3), gaussian(rng, 11, 3), 2); }), ErrorKind::shape);
  EXPECT_EQ(kind_of([&] { cca_fit(gaussian(rng, 1, 3), gaussian(rng, 1, 3), 1); }), ErrorKind::data);
  EXPECT_EQ(kind_of([&] { cca_fit(gaussian(rng, 30, 3), gaussian(rng, 30, 4), 4); }), ErrorKind::contract);
  const SubspaceModel m = cca_fit(gaussian(rng, 30, 3), gaussian(rng, 30, 4), 2);
  EXPECT_EQ(kind_of([&] { project(m, gaussian(rng, 5, 3), Side::target); }), ErrorKind::shape);
  EXPECT_EQ(kind_of([&] { project(pca_fit(gaussian(rng, 30, 3), 2), gaussian(rng, 5, 3), Side::target); }),
            ErrorKind::contract);
}

TEST(Cca, HeldOutGridPrefersTheSharedRank) {
  // Three shared latent directions; the grid {3, 6} should pick 3.
  std::mt19937_64 rng(17);
  const Mat Z = gaussian(rng, 2000, 3);
  const Mat S = Z * gaussian(rng, 3, 7) + 0.2 * gaussian(rng, 2000, 7);
  const Mat T = Z * gaussian(rng, 3, 6) + 0.2 * gaussian(rng, 2000, 6);
  EXPECT_EQ(select_cca_k(S, T, 3, 1), 3u);
}

// --- time-series reshape ------------------------------------------------------

TEST(Reshape, RoundTripAndRowOrder) {
  nn::Tensor x(3, 4, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] = static_cast<double>(i);
  const Mat rows = time_steps_as_rows(x);
  ASSERT_EQ(rows.rows(), 12);
  ASSERT_EQ(rows.cols(), 2);
  EXPECT_EQ(rows(1 * 4 + 2, 1), x(1, 2, 1));  // one row per (sample, time step)
  EXPECT_EQ(rows_as_time_steps(rows, 3, 4).values(), x.values());
  EXPECT_EQ(kind_of([&] { rows_as_time_steps(rows, 4, 4); }), ErrorKind::shape);
}

TEST(Reshape, PairedRowsFollowThePairTable) {
  nn::Tensor s(2, 3, 1), t(3, 3, 2);
  for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] = static_cast<double>(i);
  const std::vector<std::size_t> pairs = {2, 0};
  const auto [a, b] = paired_time_step_rows(s, t, pairs);
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(b(0, 0), t(2, 0, 0));
  EXPECT_EQ(b(3 + 2, 1), t(0, 2, 1));
}

TEST(SubspaceModel, JsonRoundTrip) {
  std::mt19937_64 rng(18);
  SubspaceModel m = pca_pair(gaussian(rng, 40, 4), gaussian(rng, 40, 5), 3);
  m.coral = coral_align(gaussian(rng, 40, 3), gaussian(rng, 40, 3)).A;
  const SubspaceModel r = SubspaceModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(r.kind, "pca");
  EXPECT_EQ(r.source_projection, m.source_projection);
  EXPECT_EQ(r.target_projection, m.target_projection);
  EXPECT_EQ(r.target_mean, m.target_mean);
  EXPECT_EQ(r.target_ratios, m.target_ratios);
  ASSERT_TRUE(r.coral.has_value());
  EXPECT_EQ(*r.coral, *m.coral);
}
