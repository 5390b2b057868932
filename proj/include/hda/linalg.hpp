#pragma once

// Dense linear-algebra kernel shared by the subspace baselines and the
// evaluation metrics. Matrices are Eigen dense doubles; the decompositions
// below are implemented here rather than delegated so that their sign and
// ordering conventions are fixed.

#include <Eigen/Dense>

namespace hda::linalg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct SymEig {
  Vec values;   // descending
  Mat vectors;  // orthonormal columns, column i pairs with values(i)
};

// Sample covariance of the rows of X with divisor n-1. When `centered` is
// false the column means are subtracted first; when true X is assumed to be
// already centered.
Mat covariance(const Mat& X, bool centered = false);

// Cross-covariance between the rows of X and Y (same row count), divisor n-1.
Mat cross_covariance(const Mat& X, const Mat& Y);

Vec column_means(const Mat& X);

// Cyclic Jacobi rotations. Converges when the off-diagonal Frobenius norm is
// below 1e-12 (relative to the matrix scale) or after 100 sweeps.
// Each eigenvector is signed so that its first component with magnitude above
// 1e-12 is positive.
SymEig sym_eig(const Mat& A);

// Lower-triangular L with L * L^T = A. Throws ErrorKind::numeric when a pivot
// is not strictly positive.
Mat cholesky(const Mat& A);

// Symmetric PSD square root. Eigenvalues in [-1e-6, 0) are clamped to zero;
// anything more negative is rejected as not PSD.
Mat sqrtm_psd(const Mat& A);

// Inverse square root of a symmetric PD matrix.
Mat inv_sqrtm_pd(const Mat& A);

// Conditioning floor for covariances that are about to be inverted or
// factorized: eigenvalues below rel * mean(diag(C)) are raised to that floor.
// Matrices whose spectrum already clears the floor are returned unchanged.
Mat regularize_spd(const Mat& C, double rel = 1e-6);

// Solves L * X = B for lower-triangular L.
Mat solve_lower(const Mat& L, const Mat& B);
// Solves L^T * X = B for lower-triangular L.
Mat solve_lower_transposed(const Mat& L, const Mat& B);

// Largest absolute asymmetry |A - A^T|_inf (entrywise max).
double asymmetry(const Mat& A);

}  // namespace hda::linalg
