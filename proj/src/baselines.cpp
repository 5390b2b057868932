#include "hda/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hda/error.hpp"

namespace hda::baselines {

using namespace linalg;

namespace {

nlohmann::json mat_json(const Mat& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", v}};
}

Mat json_mat(const nlohmann::json& j) {
  const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  const auto v = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(v.size()) == r * c, ErrorKind::data, "matrix data does not match rows x cols");
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index jj = 0; jj < c; ++jj) m(i, jj) = v[static_cast<std::size_t>(i * c + jj)];
  return m;
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat centered(const Mat& X, const Vec& mean) { return X.rowwise() - mean.transpose(); }

struct Pca {
  Mat axes;  // d x k
  Vec mean;
  Vec ratios;  // top k
};

Pca fit_axes(const Mat& X, std::size_t k) {
  require(k >= 1, ErrorKind::contract, "pca: k must be at least 1");
  require(k <= static_cast<std::size_t>(X.cols()), ErrorKind::contract,
          "pca: k = " + std::to_string(k) + " exceeds the input dimension " + std::to_string(X.cols()));
  require(static_cast<std::size_t>(X.rows()) > k, ErrorKind::data, "pca: need more samples than components");
  const SymEig e = sym_eig(covariance(X));
  const double trace = e.values.cwiseMax(0.0).sum();
  require(trace > 0.0, ErrorKind::numeric, "pca: input has zero variance");
  const auto kk = static_cast<Eigen::Index>(k);
  return {e.vectors.leftCols(kk), column_means(X), e.values.head(kk).cwiseMax(0.0) / trace};
}

}  // namespace

nlohmann::json SubspaceModel::to_json() const {
  nlohmann::json j = {{"kind", kind},
                      {"source_projection", mat_json(source_projection)},
                      {"source_mean", vec_json(source_mean)},
                      {"target_projection", mat_json(target_projection)},
                      {"target_mean", vec_json(target_mean)},
                      {"ratios", vec_json(ratios)},
                      {"target_ratios", vec_json(target_ratios)}};
  j["coral"] = coral ? mat_json(*coral) : nlohmann::json(nullptr);
  return j;
}

SubspaceModel SubspaceModel::from_json(const nlohmann::json& j) {
  SubspaceModel m;
  m.kind = j.at("kind").get<std::string>();
  require(m.kind == "pca" || m.kind == "cca", ErrorKind::data, "unknown subspace kind '" + m.kind + "'");
  m.source_projection = json_mat(j.at("source_projection"));
  m.source_mean = json_vec(j.at("source_mean"));
  m.target_projection = json_mat(j.at("target_projection"));
  m.target_mean = json_vec(j.at("target_mean"));
  m.ratios = json_vec(j.at("ratios"));
  m.target_ratios = json_vec(j.at("target_ratios"));
  if (!j.at("coral").is_null()) m.coral = json_mat(j.at("coral"));
  return m;
}

Vec explained_variance_ratios(const Mat& X) {
  require(X.rows() >= 2 && X.cols() >= 1, ErrorKind::data, "explained variance needs at least 2 rows");
  const Vec ev = sym_eig(covariance(X)).values.cwiseMax(0.0);
  const double trace = ev.sum();
  require(trace > 0.0, ErrorKind::numeric, "explained variance: input has zero variance");
  return ev / trace;
}

SubspaceModel pca_fit(const Mat& X, std::size_t k) {
  Pca p = fit_axes(X, k);
  SubspaceModel m;
  m.kind = "pca";
  m.source_projection = std::move(p.axes);
  m.source_mean = std::move(p.mean);
  m.ratios = std::move(p.ratios);
  return m;
}

SubspaceModel pca_pair(const Mat& S, const Mat& T, std::size_t k) {
  SubspaceModel m = pca_fit(S, k);
  Pca t = fit_axes(T, k);
  m.target_projection = std::move(t.axes);
  m.target_mean = std::move(t.mean);
  m.target_ratios = std::move(t.ratios);
  return m;
}

std::size_t select_k_by_variance(std::span<const double> ratios, double threshold) {
  require(!ratios.empty(), ErrorKind::contract, "select_k: no ratios");
  double total = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    require(ratios[i] >= 0.0 && (i == 0 || ratios[i] <= ratios[i - 1] + 1e-12), ErrorKind::contract,
            "select_k: ratios must be nonnegative and descending");
    total += ratios[i];
  }
  require(total <= 1.0 + 1e-9, ErrorKind::contract, "select_k: ratios sum above 1");
  double cum = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    cum += ratios[i];
    if (cum >= threshold - 1e-12) return i + 1;
  }
  fail(ErrorKind::contract, "select_k: threshold " + std::to_string(threshold) + " exceeds the total coverage " +
                                std::to_string(total));
}

Mat coral_apply(const Mat& X, const Mat& A, const Vec& from_mean, const Vec& to_mean) {
  require(X.cols() == A.rows() && A.cols() == to_mean.size() && from_mean.size() == X.cols(), ErrorKind::shape,
          "coral: dimension mismatch");
  return (centered(X, from_mean) * A).rowwise() + to_mean.transpose();
}

CoralResult coral_align(const Mat& S, const Mat& T) {
  require(S.cols() == T.cols(), ErrorKind::shape,
          "coral: latent dimensions differ (" + std::to_string(S.cols()) + " vs " + std::to_string(T.cols()) + ")");
  require(S.rows() >= 2 && T.rows() >= 2, ErrorKind::data, "coral: need at least 2 rows per side");
  const Mat raw_s = covariance(S), raw_t = covariance(T);
  require(raw_s.trace() > 0.0 && raw_t.trace() > 0.0, ErrorKind::numeric,
          "coral: singular covariance (all columns constant)");
  const Mat cs = regularize_spd(raw_s), ct = regularize_spd(raw_t);
  CoralResult r;
  r.A = inv_sqrtm_pd(cs) * sqrtm_psd(ct);
  r.aligned = coral_apply(S, r.A, column_means(S), column_means(T));
  return r;
}

SubspaceModel cca_fit(const Mat& S, const Mat& T, std::size_t k) {
  require(S.rows() == T.rows(), ErrorKind::shape, "cca: views must be row-paired");
  require(S.rows() >= 2, ErrorKind::data, "cca: need at least 2 paired rows");
  const auto dmin = static_cast<std::size_t>(std::min(S.cols(), T.cols()));
  require(k >= 1 && k <= dmin, ErrorKind::contract,
          "cca: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(dmin) + "]");
  const Vec ms = column_means(S), mt = column_means(T);
  const Mat sc = centered(S, ms), tc = centered(T, mt);
  const Mat css = regularize_spd(covariance(sc, true));
  const Mat ctt = regularize_spd(covariance(tc, true));
  const Mat cst = cross_covariance(sc, tc);

  // With C_SS = L_S L_S^T and C_TT = L_T L_T^T the problem becomes an
  // ordinary symmetric one: M M^T u = rho^2 u, M = L_S^-1 C_ST L_T^-T.
  const Mat ls = cholesky(css), lt = cholesky(ctt);
  const Mat M = solve_lower(ls, solve_lower(lt, cst.transpose()).transpose());
  const SymEig e = sym_eig(M * M.transpose());
  const auto kk = static_cast<Eigen::Index>(k);
  Vec rho = e.values.head(kk).cwiseMax(0.0).cwiseSqrt();
  require(rho(kk - 1) > 1e-12, ErrorKind::numeric, "cca: k exceeds the rank of the cross-covariance");
  rho = rho.cwiseMin(1.0);

  SubspaceModel m;
  m.kind = "cca";
  m.source_projection = solve_lower_transposed(ls, e.vectors.leftCols(kk));  // unit variance: u^T u = 1
  // Stationarity: C_TS w_S = rho C_TT w_T.
  Mat wt = cst.transpose() * m.source_projection;
  wt = solve_lower_transposed(lt, solve_lower(lt, wt));
  for (Eigen::Index i = 0; i < kk; ++i) wt.col(i) /= rho(i);
  m.target_projection = std::move(wt);
  m.source_mean = ms;
  m.target_mean = mt;
  m.ratios = rho;
  return m;
}

Mat project(const SubspaceModel& m, const Mat& X, Side side) {
  require(m.has_side(side), ErrorKind::contract, "project: the model has no target side");
  const Mat& W = side == Side::source ? m.source_projection : m.target_projection;
  const Vec& mu = side == Side::source ? m.source_mean : m.target_mean;
  require(X.cols() == W.rows(), ErrorKind::shape,
          std::string("project: ") + (side == Side::source ? "source" : "target") + " side expects " +
              std::to_string(W.rows()) + " columns, got " + std::to_string(X.cols()));
  return centered(X, mu) * W;
}

Mat reconstruct(const SubspaceModel& m, const Mat& Z) {
  require(m.kind == "pca", ErrorKind::contract, "reconstruct: PCA models only");
  require(Z.cols() == m.source_projection.cols(), ErrorKind::shape, "reconstruct: latent width mismatch");
  return (Z * m.source_projection.transpose()).rowwise() + m.source_mean.transpose();
}

std::size_t select_cca_k(const Mat& S, const Mat& T, std::size_t step, std::uint64_t seed) {
  require(step >= 1, ErrorKind::config, "cca k grid step must be positive");
  require(S.rows() == T.rows() && S.rows() >= 10, ErrorKind::data, "cca k selection needs at least 10 paired rows");
  const auto dmin = static_cast<std::size_t>(std::min(S.cols(), T.cols()));
  std::vector<std::size_t> grid;
  for (std::size_t k = step; k <= dmin; k += step) grid.push_back(k);
  if (grid.empty()) grid.push_back(dmin);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(S.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t hold = order.size() / 5;
  auto rows = [&](const Mat& X, std::size_t from, std::size_t to) {
    Mat out(static_cast<Eigen::Index>(to - from), X.cols());
    for (std::size_t i = from; i < to; ++i) out.row(static_cast<Eigen::Index>(i - from)) = X.row(order[i]);
    return out;
  };
  const Mat s_fit = rows(S, hold, order.size()), t_fit = rows(T, hold, order.size());
  const Mat s_val = rows(S, 0, hold), t_val = rows(T, 0, hold);

  // One fit at the largest k; the first k pairs do not depend on k.
  const SubspaceModel m = cca_fit(s_fit, t_fit, grid.back());
  const Mat a = project(m, s_val, Side::source), b = project(m, t_val, Side::target);
  std::vector<double> r(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const Vec x = a.col(i).array() - a.col(i).mean(), y = b.col(i).array() - b.col(i).mean();
    const double den = std::sqrt(x.squaredNorm() * y.squaredNorm());
    r[static_cast<std::size_t>(i)] = den > 0.0 ? x.dot(y) / den : 0.0;
  }
  std::size_t best = grid.front();
  double best_score = -2.0;
  for (std::size_t k : grid) {
    const double score = std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
    if (score > best_score + 1e-12) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

Mat time_steps_as_rows(const nn::Tensor& x) {
  Mat m(static_cast<Eigen::Index>(x.batch() * x.time()), static_cast<Eigen::Index>(x.channels()));
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t t = 0; t < x.time(); ++t)
      for (std::size_t c = 0; c < x.channels(); ++c)
        m(static_cast<Eigen::Index>(b * x.time() + t), static_cast<Eigen::Index>(c)) = x(b, t, c);
  return m;
}

nn::Tensor rows_as_time_steps(const Mat& rows, std::size_t batch, std::size_t time) {
  require(static_cast<std::size_t>(rows.rows()) == batch * time, ErrorKind::shape,
          "rows_as_time_steps: row count is not batch * time");
  const auto C = static_cast<std::size_t>(rows.cols());
  nn::Tensor x(batch, time, C);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t c = 0; c < C; ++c)
        x(b, t, c) = rows(static_cast<Eigen::Index>(b * time + t), static_cast<Eigen::Index>(c));
  return x;
}

std::pair<Mat, Mat> paired_time_step_rows(const nn::Tensor& xs, const nn::Tensor& xt,
                                          std::span<const std::size_t> pairs) {
  require(pairs.size() == xs.batch(), ErrorKind::shape, "pairing table must cover every source sample");
  require(xs.time() == xt.time(), ErrorKind::shape, "paired views need equal series length");
  return {time_steps_as_rows(xs), time_steps_as_rows(nn::gather(xt, pairs))};
}

}  // namespace hda::baselines
