#include "hda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "hda/error.hpp"
#include "hda/json_io.hpp"

namespace hda::metrics {

using namespace linalg;

double mae(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() == truth.size(), ErrorKind::shape, "mae: length mismatch");
  require(!pred.empty(), ErrorKind::data, "mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double fid(const Mat& X, const Mat& Y, FidDetail* detail) {
  require(X.cols() == Y.cols(), ErrorKind::shape,
          "fid: feature dimensions differ (" + std::to_string(X.cols()) + " vs " + std::to_string(Y.cols()) + ")");
  require(X.rows() >= 2 && Y.rows() >= 2, ErrorKind::data, "fid: need at least 2 rows per set");
  const Mat sx = covariance(X), sy = covariance(Y);
  const Mat rx = sqrtm_psd(sx);
  Mat inner = rx * sy * rx;
  inner = 0.5 * (inner + inner.transpose());
  const double mean_term = (column_means(X) - column_means(Y)).squaredNorm();
  const double trace_term = sx.trace() + sy.trace() - 2.0 * sqrtm_psd(inner).trace();
  double v = mean_term + trace_term;
  double clamped = 0.0;
  if (v < 0.0) {
    clamped = -v;
    if (clamped > 1e-6) std::fprintf(stderr, "warning: fid clamped a negative residue of %.3g\n", clamped);
    v = 0.0;
  }
  if (detail) {
    detail->mean_term = mean_term;
    detail->trace_term = trace_term;
    detail->clamped = clamped;
    detail->undersampled = X.rows() < X.cols() + 1 || Y.rows() < Y.cols() + 1;
  }
  return v;
}

std::size_t PearsonResult::count_above(double threshold) const {
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [&](double v) { return v > threshold; }));
}

nlohmann::json PearsonResult::to_json() const {
  return {{"r", r}, {"degenerate", degenerate}, {"above_0_5", count_above(0.5)}};
}

PearsonResult pearson_per_component(const Mat& A, const Mat& B) {
  require(A.rows() == B.rows() && A.cols() == B.cols(), ErrorKind::shape, "pearson: inputs must have equal shape");
  require(A.cols() >= 1 && A.rows() >= 2, ErrorKind::data, "pearson: need at least 2 rows and 1 column");
  PearsonResult out;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    const Vec a = A.col(j).array() - A.col(j).mean();
    const Vec b = B.col(j).array() - B.col(j).mean();
    const double den = std::sqrt(a.squaredNorm() * b.squaredNorm());
    const bool flat = !(den > 0.0);
    out.degenerate.push_back(flat);
    out.r.push_back(flat ? 0.0 : std::clamp(a.dot(b) / den, -1.0, 1.0));
  }
  return out;
}

Mat flatten(const nn::Tensor& x) {
  Mat m(static_cast<Eigen::Index>(x.batch()), static_cast<Eigen::Index>(x.shape().size()));
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const auto s = x.sample(b);
    for (std::size_t i = 0; i < s.size(); ++i) m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = s[i];
  }
  return m;
}

Mat Embedding::apply(const nn::Tensor& x) const {
  const Mat f = flatten(x);
  require(f.cols() == axes.rows(), ErrorKind::shape, "embedding: sample size does not match the fitted embedding");
  return (f.rowwise() - mean.transpose()) * axes;
}

Embedding fit_embedding(const nn::Tensor& x, std::size_t k) {
  require(x.batch() >= 2, ErrorKind::data, "embedding: need at least 2 samples");
  const Mat f = flatten(x);
  const auto kk = static_cast<Eigen::Index>(std::min<std::size_t>(k, static_cast<std::size_t>(f.cols())));
  // FID is invariant to rotations within the kept subspace, so the library
  // solver's ordering and sign conventions do not matter here (and Jacobi is
  // too slow at T*C in the hundreds).
  const Eigen::SelfAdjointEigenSolver<Mat> e(covariance(f));
  require(e.info() == Eigen::Success, ErrorKind::numeric, "embedding: eigendecomposition failed");
  return {e.eigenvectors().rightCols(kk).rowwise().reverse(), column_means(f)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_halves(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n / 2));
  std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(n / 2), idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {a, b};
}

nlohmann::json DomainDistanceReport::to_json() const {
  return {{"inner_source", inner_source}, {"inner_target", inner_target}, {"outer_before", outer_before},
          {"outer_after", outer_after},   {"source_count", source_count}, {"target_count", target_count}};
}

DomainDistanceReport DomainDistanceReport::from_json(const nlohmann::json& j) {
  DomainDistanceReport r;
  r.inner_source = j.at("inner_source").get<double>();
  r.inner_target = j.at("inner_target").get<double>();
  r.outer_before = j.at("outer_before").get<double>();
  r.outer_after = j.at("outer_after").get<double>();
  r.source_count = j.at("source_count").get<std::size_t>();
  r.target_count = j.at("target_count").get<std::size_t>();
  return r;
}

DomainDistanceReport domain_distances(const nn::Tensor& source, const nn::Tensor& target, const nn::Tensor& before,
                                      const nn::Tensor& after, std::uint64_t seed) {
  require(before.shape() == source.shape() && after.shape() == source.shape(), ErrorKind::shape,
          "domain distances: mapped target must live in source space");
  require(before.batch() == target.batch() && after.batch() == target.batch(), ErrorKind::shape,
          "domain distances: one mapped sample per target sample");
  DomainDistanceReport r;
  r.source_count = source.batch();
  r.target_count = target.batch();
  const Embedding es = fit_embedding(source);
  const Mat zs = es.apply(source);
  {
    const auto [a, b] = split_halves(source.batch(), seed);
    r.inner_source = fid(zs(a, Eigen::all), zs(b, Eigen::all));
  }
  {
    const Embedding et = fit_embedding(target);
    const Mat zt = et.apply(target);
    const auto [a, b] = split_halves(target.batch(), seed + 1);
    r.inner_target = fid(zt(a, Eigen::all), zt(b, Eigen::all));
  }
  r.outer_before = fid(zs, es.apply(before));
  r.outer_after = fid(zs, es.apply(after));
  return r;
}

nlohmann::json MaeRow::to_json() const {
  return {{"source_train", source_train},
          {"source_test", source_test},
          {"target_train", target_train},
          {"target_test", target_test}};
}

MaeRow MaeRow::from_json(const nlohmann::json& j) {
  return {j.at("source_train").get<double>(), j.at("source_test").get<double>(), j.at("target_train").get<double>(),
          j.at("target_test").get<double>()};
}

const MaeRow& MaeTable::at(const std::string& name) const {
  for (const auto& [n, row] : rows)
    if (n == name) return row;
  fail(ErrorKind::contract, "table has no row '" + name + "'");
}

nlohmann::json MaeTable::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [n, row] : rows) {
    auto r = row.to_json();
    r["row"] = n;
    j.push_back(r);
  }
  return j;
}

MaeTable MaeTable::from_json(const nlohmann::json& j) {
  MaeTable t;
  for (const auto& r : j) t.rows.emplace_back(r.at("row").get<std::string>(), MaeRow::from_json(r));
  return t;
}

std::string MaeTable::to_csv() const {
  std::ostringstream os;
  os << "row,source_train_mae,source_test_mae,target_train_mae,target_test_mae\n";
  for (const auto& [n, r] : rows)
    os << n << ',' << format_double(r.source_train) << ',' << format_double(r.source_test) << ','
       << format_double(r.target_train) << ',' << format_double(r.target_test) << '\n';
  return os.str();
}

MaeTable average(std::span<const MaeTable> folds) {
  require(!folds.empty(), ErrorKind::data, "average: no folds");
  MaeTable out = folds.front();
  for (auto& [name, row] : out.rows) {
    MaeRow sum{};
    for (const MaeTable& f : folds) {
      require(f.rows.size() == out.rows.size(), ErrorKind::shape, "average: folds list different rows");
      const MaeRow& r = f.at(name);
      sum.source_train += r.source_train;
      sum.source_test += r.source_test;
      sum.target_train += r.target_train;
      sum.target_test += r.target_test;
    }
    const auto n = static_cast<double>(folds.size());
    row = {sum.source_train / n, sum.source_test / n, sum.target_train / n, sum.target_test / n};
  }
  return out;
}

}  // namespace hda::metrics
