#include "hda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hda/error.hpp"

namespace hda::linalg {

namespace {

constexpr double kSymmetryTolerance = 1e-8;
constexpr int kMaxSweeps = 100;

void require_square(const Mat& A, const char* what) {
  if (A.rows() != A.cols()) {
    fail(ErrorKind::shape, std::string(what) + ": matrix is " + std::to_string(A.rows()) + "x" +
                               std::to_string(A.cols()) + ", expected square");
  }
}

void require_finite(const Mat& A, const char* what) {
  if (!A.allFinite()) fail(ErrorKind::contract, std::string(what) + ": non-finite entries");
}

double off_diagonal_norm(const Mat& A) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (i != j) s += A(i, j) * A(i, j);
  return std::sqrt(s);
}

}  // namespace

Vec column_means(const Mat& X) { return X.colwise().mean().transpose(); }

Mat covariance(const Mat& X, bool centered) {
  if (X.rows() < 2) {
    fail(ErrorKind::data, "covariance: insufficient samples (n=" + std::to_string(X.rows()) + ", need >= 2)");
  }
  require_finite(X, "covariance");
  const double denom = static_cast<double>(X.rows() - 1);
  Mat C;
  if (centered) {
    C = (X.transpose() * X) / denom;
  } else {
    const Mat Xc = X.rowwise() - X.colwise().mean();
    C = (Xc.transpose() * Xc) / denom;
  }
  // Symmetrize away GEMM round-off.
  return 0.5 * (C + C.transpose());
}

Mat cross_covariance(const Mat& X, const Mat& Y) {
  if (X.rows() != Y.rows()) fail(ErrorKind::shape, "cross_covariance: row counts differ");
  if (X.rows() < 2) fail(ErrorKind::data, "cross_covariance: insufficient samples");
  const Mat Xc = X.rowwise() - X.colwise().mean();
  const Mat Yc = Y.rowwise() - Y.colwise().mean();
  return (Xc.transpose() * Yc) / static_cast<double>(X.rows() - 1);
}

double asymmetry(const Mat& A) {
  if (A.rows() != A.cols()) return std::numeric_limits<double>::infinity();
  return (A - A.transpose()).cwiseAbs().maxCoeff();
}

SymEig sym_eig(const Mat& A) {
  require_square(A, "sym_eig");
  require_finite(A, "sym_eig");
  if (A.size() > 0 && asymmetry(A) > kSymmetryTolerance) {
    fail(ErrorKind::contract, "sym_eig: input is not symmetric (asymmetry " + std::to_string(asymmetry(A)) + ")");
  }
  const Eigen::Index n = A.rows();
  Mat a = 0.5 * (A + A.transpose());
  Mat v = Mat::Identity(n, n);

  const double scale = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (off_diagonal_norm(a) < 1e-12 * scale) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        // Rotation angle that zeroes a(p, q).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymEig out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    Vec col = v.col(src);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(col(i)) > 1e-12) {
        if (col(i) < 0) col = -col;
        break;
      }
    }
    out.vectors.col(k) = col;
  }
  return out;
}

Mat cholesky(const Mat& A) {
  require_square(A, "cholesky");
  require_finite(A, "cholesky");
  if (A.size() > 0 && asymmetry(A) > kSymmetryTolerance * std::max(1.0, A.cwiseAbs().maxCoeff())) {
    fail(ErrorKind::contract, "cholesky: input is not symmetric");
  }
  const Eigen::Index n = A.rows();
  Mat L = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = A(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0)) {
      fail(ErrorKind::numeric, "cholesky: matrix is not positive definite (pivot " + std::to_string(j) +
                                   " = " + std::to_string(d) + ")");
    }
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return L;
}

Mat sqrtm_psd(const Mat& A) {
  const SymEig e = sym_eig(A);
  Vec root(e.values.size());
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    const double lambda = e.values(i);
    if (lambda < -1e-6) {
      fail(ErrorKind::numeric, "sqrtm_psd: matrix is not PSD (eigenvalue " + std::to_string(lambda) + ")");
    }
    root(i) = std::sqrt(std::max(lambda, 0.0));
  }
  Mat S = e.vectors * root.asDiagonal() * e.vectors.transpose();
  return 0.5 * (S + S.transpose());
}

Mat inv_sqrtm_pd(const Mat& A) {
  const SymEig e = sym_eig(A);
  Vec inv_root(e.values.size());
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    if (!(e.values(i) > 0.0)) {
      fail(ErrorKind::numeric, "inv_sqrtm_pd: matrix is singular (eigenvalue " + std::to_string(e.values(i)) + ")");
    }
    inv_root(i) = 1.0 / std::sqrt(e.values(i));
  }
  Mat S = e.vectors * inv_root.asDiagonal() * e.vectors.transpose();
  return 0.5 * (S + S.transpose());
}

Mat regularize_spd(const Mat& C, double rel) {
  require_square(C, "regularize_spd");
  if (C.size() == 0) return C;
  const double floor = rel * std::max(C.diagonal().mean(), 0.0);
  const SymEig e = sym_eig(C);
  if (e.values.minCoeff() >= floor && e.values.minCoeff() > 0.0) return C;
  const double effective = floor > 0.0 ? floor : rel;
  const Vec clamped = e.values.cwiseMax(effective);
  Mat R = e.vectors * clamped.asDiagonal() * e.vectors.transpose();
  return 0.5 * (R + R.transpose());
}

Mat solve_lower(const Mat& L, const Mat& B) {
  return L.triangularView<Eigen::Lower>().solve(B);
}

Mat solve_lower_transposed(const Mat& L, const Mat& B) {
  return L.transpose().triangularView<Eigen::Upper>().solve(B);
}

}  // namespace hda::linalg
