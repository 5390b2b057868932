#pragma once
// Linear alignment baselines: PCA subspaces, CORAL whiten-recolor and CCA.
// Everything works on 2-D sample matrices; time series enter through the
// per-time-step reshape below.
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hda/linalg.hpp"
#include "hda/nn/tensor.hpp"
#include "json.hpp"

namespace hda::baselines {

using linalg::Mat;
using linalg::Vec;

enum class Side { source, target };

struct SubspaceModel {
  std::string kind;  // "pca" or "cca"
  Mat source_projection;  // d_S x k
  Vec source_mean;
  Mat target_projection;  // d_T x k; empty for a single-domain PCA
  Vec target_mean;
  Vec ratios;         // pca: source explained-variance ratios; cca: canonical correlations
  Vec target_ratios;  // pca pair only
  std::optional<Mat> coral;  // recolor matrix applied after projection, if fitted

  std::size_t components() const { return static_cast<std::size_t>(source_projection.cols()); }
  bool has_side(Side s) const { return s == Side::source ? source_projection.size() > 0 : target_projection.size() > 0; }

  nlohmann::json to_json() const;
  static SubspaceModel from_json(const nlohmann::json& j);
};

// Covariance eigenvalues / trace, descending, one per input dimension.
Vec explained_variance_ratios(const Mat& X);

// Top-k principal axes of X (fills the source side).
SubspaceModel pca_fit(const Mat& X, std::size_t k);

// Two independent PCA fits with a common k (source side from S, target side from T).
SubspaceModel pca_pair(const Mat& S, const Mat& T, std::size_t k);

// Smallest k whose cumulative ratio reaches `threshold` (at least 1).
std::size_t select_k_by_variance(std::span<const double> ratios, double threshold);

struct CoralResult {
  Mat A;        // d x d
  Mat aligned;  // (S - mean S) A + mean T
};

// Whitens S with its own covariance and recolors it with the covariance of T.
// Covariances get the eigenvalue floor of linalg::regularize_spd.
CoralResult coral_align(const Mat& S, const Mat& T);

// Applies a fitted recolor matrix: (X - from_mean) A + to_mean.
Mat coral_apply(const Mat& X, const Mat& A, const Vec& from_mean, const Vec& to_mean);

// Canonical pairs of row-paired views S (n x d_S) and T (n x d_T); weights are
// scaled to unit canonical variance and correlations come out descending.
SubspaceModel cca_fit(const Mat& S, const Mat& T, std::size_t k);

// Centers with the side's mean and projects onto its k columns.
Mat project(const SubspaceModel& m, const Mat& X, Side side);

// PCA reconstruction from latent coordinates (source side).
Mat reconstruct(const SubspaceModel& m, const Mat& Z);

// k from {step, 2 step, ...} up to min(d_S, d_T) maximizing the mean held-out
// canonical correlation of the first k pairs. A seeded fifth of the rows is held out.
std::size_t select_cca_k(const Mat& S, const Mat& T, std::size_t step, std::uint64_t seed);

// --- time series -------------------------------------------------------------

// B x T x C -> (B*T) x C, row b*T + t holds time step t of sample b.
Mat time_steps_as_rows(const nn::Tensor& x);
nn::Tensor rows_as_time_steps(const Mat& rows, std::size_t batch, std::size_t time);

// Row-pairs two batches for CCA: sample i of `xs` with sample pairs[i] of `xt`,
// time step by time step.
std::pair<Mat, Mat> paired_time_step_rows(const nn::Tensor& xs, const nn::Tensor& xt,
                                          std::span<const std::size_t> pairs);

}  // namespace hda::baselines
