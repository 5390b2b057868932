#pragma once
// Evaluation: MAE, Fréchet distance between sample sets, per-component
// Pearson correlation, and the fold-level report fragments the tables are
// built from.
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hda/linalg.hpp"
#include "hda/nn/tensor.hpp"
#include "json.hpp"

namespace hda::metrics {

using linalg::Mat;
using linalg::Vec;

double mae(std::span<const double> pred, std::span<const double> truth);

struct FidDetail {
  double mean_term = 0.0;
  double trace_term = 0.0;
  double clamped = 0.0;  // negative residue removed by the clamp at 0
  bool undersampled = false;  // fewer rows than d + 1 on either side
};

// |mu_X - mu_Y|^2 + tr(S_X + S_Y - 2 sqrt(S_X^1/2 S_Y S_X^1/2)), clamped at 0.
double fid(const Mat& X, const Mat& Y, FidDetail* detail = nullptr);

struct PearsonResult {
  std::vector<double> r;
  std::vector<bool> degenerate;  // zero-variance column on either side (r reported as 0)
  std::size_t count_above(double threshold) const;
  nlohmann::json to_json() const;
};

PearsonResult pearson_per_component(const Mat& A, const Mat& B);

// --- FID feature space ---------------------------------------------------------

// Each sample flattened to one row of T*C values (time-major).
Mat flatten(const nn::Tensor& x);

// PCA of flattened samples; FID is computed on these coordinates.
struct Embedding {
  Mat axes;  // (T*C) x k
  Vec mean;
  Mat apply(const nn::Tensor& x) const;
};
inline constexpr std::size_t kEmbeddingDim = 32;
Embedding fit_embedding(const nn::Tensor& x, std::size_t k = kEmbeddingDim);

// Rows 0..n-1 split into two seeded random halves.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_halves(std::size_t n, std::uint64_t seed);

struct DomainDistanceReport {
  double inner_source = 0.0;   // two halves of the source set, source embedding
  double inner_target = 0.0;   // two halves of the target set, target embedding
  double outer_before = 0.0;   // source vs target mapped by the untrained aligner
  double outer_after = 0.0;    // source vs target mapped by the trained aligner
  std::size_t source_count = 0;
  std::size_t target_count = 0;
  nlohmann::json to_json() const;
  static DomainDistanceReport from_json(const nlohmann::json& j);
};

// `before` and `after` are the target set mapped into source space.
DomainDistanceReport domain_distances(const nn::Tensor& source, const nn::Tensor& target, const nn::Tensor& before,
                                      const nn::Tensor& after, std::uint64_t seed);

// --- table cells ------------------------------------------------------------------

// One table row: source train/test and target train/test MAE.
struct MaeRow {
  double source_train = 0.0;
  double source_test = 0.0;
  double target_train = 0.0;
  double target_test = 0.0;
  nlohmann::json to_json() const;
  static MaeRow from_json(const nlohmann::json& j);
  friend bool operator==(const MaeRow&, const MaeRow&) = default;
};

// Named rows in display order.
struct MaeTable {
  std::vector<std::pair<std::string, MaeRow>> rows;
  const MaeRow& at(const std::string& name) const;
  nlohmann::json to_json() const;
  static MaeTable from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

// Cell-wise arithmetic mean over folds; all tables must list the same rows.
MaeTable average(std::span<const MaeTable> folds);

}  // namespace hda::metrics
