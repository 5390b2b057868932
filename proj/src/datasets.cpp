#include "hda/datasets.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hda/error.hpp"
#include "hda/json_io.hpp"

namespace hda::data {

namespace {

using Rng = std::mt19937_64;

std::uint64_t fnv1a(const void* p, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string channel_name(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02zu", prefix.c_str(), i);
  return buf;
}

}  // namespace

// --- Normalizer / dataset helpers ----------------------------------------------

nlohmann::json Normalizer::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : channels) j.push_back({{"min", c.min}, {"max", c.max}});
  return j;
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  Normalizer n;
  for (const auto& c : j) n.channels.push_back({c.at("min").get<double>(), c.at("max").get<double>()});
  return n;
}

std::uint64_t Normalizer::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& c : channels) {
    h = fnv1a(&c.min, sizeof(double), h);
    h = fnv1a(&c.max, sizeof(double), h);
  }
  return h;
}

std::size_t DomainDataset::time() const {
  if (samples.empty()) return 0;
  const auto t = static_cast<std::size_t>(samples.front().values.rows());
  for (const auto& s : samples) {
    if (static_cast<std::size_t>(s.values.rows()) != t) {
      fail(ErrorKind::shape, domain + " dataset: samples have unequal lengths (run preprocess first)");
    }
  }
  return t;
}

std::vector<double> DomainDataset::labels() const {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

DomainDataset subset(const DomainDataset& ds, const std::vector<std::size_t>& indices) {
  DomainDataset out = ds;
  out.samples.clear();
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < ds.size(), ErrorKind::contract, "subset index out of range");
    out.samples.push_back(ds.samples[i]);
  }
  return out;
}

nn::Tensor to_tensor(const DomainDataset& ds, const std::vector<std::size_t>& indices) {
  const std::size_t t = ds.time();
  const std::size_t c = ds.channels();
  nn::Tensor x(indices.size(), t, c);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Mat& v = ds.samples.at(indices[b]).values;
    require(static_cast<std::size_t>(v.cols()) == c, ErrorKind::shape, "sample channel count disagrees");
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t k = 0; k < c; ++k) x(b, i, k) = v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }
  return x;
}

nn::Tensor to_tensor(const DomainDataset& ds) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  return to_tensor(ds, all);
}

// --- generator ---------------------------------------------------------------

nlohmann::json GeneratorConfig::to_json() const {
  return {{"latent_dim", latent_dim},
          {"source_channels", source_channels},
          {"target_channels", target_channels},
          {"source_constant", source_constant},
          {"source_noise_constant", source_noise_constant},
          {"target_constant", target_constant},
          {"target_noise_constant", target_noise_constant},
          {"time_steps", time_steps},
          {"source_samples", source_samples},
          {"target_samples", target_samples},
          {"channel_noise", channel_noise},
          {"label_noise", label_noise},
          {"drift", drift},
          {"amplitude_spread", amplitude_spread},
          {"nonlinear", nonlinear},
          {"length_jitter", length_jitter},
          {"length_outlier_fraction", length_outlier_fraction},
          {"label_outlier_fraction", label_outlier_fraction},
          {"paired_latents", paired_latents},
          {"seed", seed}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.source_channels = j.value("source_channels", c.source_channels);
  c.target_channels = j.value("target_channels", c.target_channels);
  c.source_constant = j.value("source_constant", c.source_constant);
  c.source_noise_constant = j.value("source_noise_constant", c.source_noise_constant);
  c.target_constant = j.value("target_constant", c.target_constant);
  c.target_noise_constant = j.value("target_noise_constant", c.target_noise_constant);
  c.time_steps = j.value("time_steps", c.time_steps);
  c.source_samples = j.value("source_samples", c.source_samples);
  c.target_samples = j.value("target_samples", c.target_samples);
  c.channel_noise = j.value("channel_noise", c.channel_noise);
  c.label_noise = j.value("label_noise", c.label_noise);
  c.drift = j.value("drift", c.drift);
  c.amplitude_spread = j.value("amplitude_spread", c.amplitude_spread);
  c.nonlinear = j.value("nonlinear", c.nonlinear);
  c.length_jitter = j.value("length_jitter", c.length_jitter);
  c.length_outlier_fraction = j.value("length_outlier_fraction", c.length_outlier_fraction);
  c.label_outlier_fraction = j.value("label_outlier_fraction", c.label_outlier_fraction);
  c.paired_latents = j.value("paired_latents", c.paired_latents);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

// Shared recipe: per latent channel, a three-step level profile plus the
// frequency band of its drift. Both equipment types run the same recipe.
struct Recipe {
  std::vector<std::array<double, 3>> levels;
};

Recipe make_recipe(std::size_t latent_dim, Rng& rng) {
  std::uniform_real_distribution<double> lvl(-1.0, 1.0);
  Recipe r;
  for (std::size_t l = 0; l < latent_dim; ++l) r.levels.push_back({lvl(rng), lvl(rng), lvl(rng)});
  // The label channel gets a strictly positive profile so its time average
  // scales with the run amplitude.
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  r.levels[0] = {pos(rng), pos(rng), pos(rng)};
  return r;
}

double step_level(const std::array<double, 3>& lv, double u) { return u < 0.3 ? lv[0] : (u < 0.7 ? lv[1] : lv[2]); }

struct LatentRun {
  Mat z;  // length x L
  double label = 0.0;
};

LatentRun draw_run(const Recipe& recipe, std::size_t length, double drift, double spread, double label_noise,
                   Rng& rng) {
  const std::size_t L = recipe.levels.size();
  std::uniform_real_distribution<double> amp0(0.0, 1.0);
  std::normal_distribution<double> amp(1.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  LatentRun run;
  run.z.resize(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(L));
  for (std::size_t l = 0; l < L; ++l) {
    const double a = l == 0 ? amp0(rng) : 1.0 + spread * (amp(rng) - 1.0);
    const double d1 = drift * nrm(rng), d2 = 0.5 * drift * nrm(rng);
    const double p1 = phase(rng), p2 = phase(rng);
    for (std::size_t t = 0; t < length; ++t) {
      const double u = length > 1 ? static_cast<double>(t) / static_cast<double>(length - 1) : 0.0;
      const double v = a * step_level(recipe.levels[l], u) + d1 * std::sin(M_PI * u + p1) + d2 * std::sin(3.0 * M_PI * u + p2);
      run.z(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = v;
    }
  }
  run.label = run.z.col(0).mean() + label_noise * nrm(rng);
  return run;
}

// Exact-count length plan: 25 % one step short, 25 % one step long, the
// configured outlier share split between far-short and far-long, the rest at
// the nominal length. Shuffled with the domain's stream.
std::vector<std::size_t> length_plan(const GeneratorConfig& cfg, std::size_t n, Rng& rng) {
  const std::size_t T = cfg.time_steps;
  std::vector<std::size_t> lengths(n, T);
  if (!cfg.length_jitter) return lengths;
  const auto n_out = static_cast<std::size_t>(std::lround(cfg.length_outlier_fraction * static_cast<double>(n)));
  const auto n_side = static_cast<std::size_t>(std::lround(0.25 * static_cast<double>(n)));
  require(n_out + 2 * n_side <= n, ErrorKind::config, "length outlier fraction too large");
  const std::size_t far = std::max<std::size_t>(4, T / 4);
  require(T > far + 1, ErrorKind::config, "time_steps too small for length jitter");
  std::size_t i = 0;
  for (std::size_t k = 0; k < n_out / 2; ++k) lengths[i++] = T - far;
  for (std::size_t k = n_out / 2; k < n_out; ++k) lengths[i++] = T + far;
  for (std::size_t k = 0; k < n_side; ++k) lengths[i++] = T - 1;
  for (std::size_t k = 0; k < n_side; ++k) lengths[i++] = T + 1;
  std::shuffle(lengths.begin(), lengths.end(), rng);
  return lengths;
}

struct DomainPlan {
  std::string domain;
  std::string prefix;
  std::size_t informative = 0;
  std::size_t constant = 0;
  std::size_t noise_constant = 0;
  std::size_t samples = 0;
  Mat mixing;
  linalg::Vec offset;
  linalg::Vec noise;
  linalg::Vec constant_levels;
};

DomainPlan make_plan(const std::string& domain, const std::string& prefix, std::size_t informative,
                     std::size_t constant, std::size_t noise_constant, std::size_t samples, std::size_t L,
                     double channel_noise, Rng& rng) {
  DomainPlan p{domain, prefix, informative, constant, noise_constant, samples, {}, {}, {}, {}};
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  p.mixing.resize(static_cast<Eigen::Index>(informative), static_cast<Eigen::Index>(L));
  for (Eigen::Index i = 0; i < p.mixing.rows(); ++i)
    for (Eigen::Index j = 0; j < p.mixing.cols(); ++j) p.mixing(i, j) = nrm(rng) / std::sqrt(static_cast<double>(L));
  p.offset.resize(static_cast<Eigen::Index>(informative));
  p.noise.resize(static_cast<Eigen::Index>(informative));
  for (Eigen::Index i = 0; i < p.offset.size(); ++i) {
    p.offset(i) = nrm(rng);
    p.noise(i) = channel_noise * unit(rng);
  }
  p.constant_levels.resize(static_cast<Eigen::Index>(constant + noise_constant));
  for (Eigen::Index i = 0; i < p.constant_levels.size(); ++i) p.constant_levels(i) = 3.0 * nrm(rng);
  return p;
}

DomainDataset observe(const DomainPlan& p, const std::vector<LatentRun>& runs, const GeneratorConfig& cfg,
                      double label_outlier_fraction, Rng& rng) {
  DomainDataset ds;
  ds.domain = p.domain;
  for (std::size_t c = 0; c < p.informative; ++c) ds.channel_names.push_back(channel_name(p.prefix + "_ch", c));
  for (std::size_t c = 0; c < p.constant; ++c) ds.channel_names.push_back(channel_name(p.prefix + "_const", c));
  for (std::size_t c = 0; c < p.noise_constant; ++c) ds.channel_names.push_back(channel_name(p.prefix + "_flat", c));
  const auto C = static_cast<Eigen::Index>(ds.channel_names.size());
  std::normal_distribution<double> nrm(0.0, 1.0);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Mat& z = runs[i].z;
    SeriesSample s;
    s.id = i;
    s.raw_length = static_cast<std::size_t>(z.rows());
    s.label = runs[i].label;
    s.values.resize(z.rows(), C);
    const Mat mixed = (z * p.mixing.transpose()).rowwise() + p.offset.transpose();
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
      for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(p.informative); ++c) {
        double v = mixed(t, c);
        if (cfg.nonlinear) v = 2.0 * std::tanh(0.5 * v);
        s.values(t, c) = v + p.noise(c) * nrm(rng);
      }
      for (Eigen::Index k = 0; k < p.constant_levels.size(); ++k) {
        const Eigen::Index c = static_cast<Eigen::Index>(p.informative) + k;
        const bool flat = k >= static_cast<Eigen::Index>(p.constant);
        s.values(t, c) = p.constant_levels(k) + (flat ? 2e-4 * nrm(rng) : 0.0);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  // Metrology glitches: a few labels far outside the physical range.
  const auto n_out = static_cast<std::size_t>(std::lround(label_outlier_fraction * static_cast<double>(runs.size())));
  if (n_out > 0) {
    double lo = ds.samples[0].label, hi = lo;
    for (const auto& s : ds.samples) {
      lo = std::min(lo, s.label);
      hi = std::max(hi, s.label);
    }
    std::vector<std::size_t> idx(runs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < n_out; ++k) ds.samples[idx[k]].label = hi + 3.0 * (hi - lo) * (1.0 + 0.1 * static_cast<double>(k));
  }
  StepRecord rec;
  rec.step = "generate";
  rec.detail = "synthetic " + p.domain + " domain";
  rec.params = cfg.to_json();
  ds.log.push_back(rec);
  return ds;
}

}  // namespace

GeneratedPair generate_pair(const GeneratorConfig& cfg) {
  require(cfg.source_samples >= 50 && cfg.target_samples >= 50, ErrorKind::config,
          "generator: sample counts must be at least 50");
  require(cfg.latent_dim >= 1, ErrorKind::config, "generator: latent_dim must be positive");
  require(cfg.time_steps >= 8, ErrorKind::config, "generator: time_steps must be at least 8");
  require(cfg.source_channels >= 1 && cfg.target_channels >= 1, ErrorKind::config,
          "generator: channel counts must be positive");
  const std::size_t cs = cfg.source_channels + cfg.source_constant + cfg.source_noise_constant;
  const std::size_t ct = cfg.target_channels + cfg.target_constant + cfg.target_noise_constant;
  require(cfg.source_channels != cfg.target_channels && cs != ct, ErrorKind::config,
          "generator: source and target channel counts must differ (heterogeneous domains)");
  require(cfg.channel_noise >= 0 && cfg.label_noise >= 0 && cfg.drift >= 0 && cfg.amplitude_spread >= 0, ErrorKind::config,
          "generator: noise scales must be nonnegative");
  require(cfg.length_outlier_fraction >= 0 && cfg.label_outlier_fraction >= 0 && cfg.label_outlier_fraction < 0.5,
          ErrorKind::config, "generator: outlier fractions out of range");

  Rng setup(cfg.seed);
  const Recipe recipe = make_recipe(cfg.latent_dim, setup);
  DomainPlan sp = make_plan("source", "s", cfg.source_channels, cfg.source_constant, cfg.source_noise_constant,
                            cfg.source_samples, cfg.latent_dim, cfg.channel_noise, setup);
  DomainPlan tp = make_plan("target", "t", cfg.target_channels, cfg.target_constant, cfg.target_noise_constant,
                            cfg.target_samples, cfg.latent_dim, cfg.channel_noise, setup);

  Rng src_rng(cfg.seed ^ 0x5157u), tgt_rng(cfg.seed ^ 0x7a7au);
  const auto src_len = length_plan(cfg, cfg.source_samples, src_rng);
  auto tgt_len = length_plan(cfg, cfg.target_samples, tgt_rng);
  const std::size_t shared = cfg.paired_latents ? std::min(cfg.source_samples, cfg.target_samples) : 0;
  for (std::size_t i = 0; i < shared; ++i) tgt_len[i] = src_len[i];

  std::vector<LatentRun> src_runs, tgt_runs;
  Rng lat_s(cfg.seed * 6364136223846793005ULL + 1), lat_t(cfg.seed * 6364136223846793005ULL + 2);
  for (std::size_t i = 0; i < cfg.source_samples; ++i)
    src_runs.push_back(draw_run(recipe, src_len[i], cfg.drift, cfg.amplitude_spread, cfg.label_noise, lat_s));
  for (std::size_t i = 0; i < cfg.target_samples; ++i) {
    if (i < shared) {
      tgt_runs.push_back(src_runs[i]);
    } else {
      tgt_runs.push_back(draw_run(recipe, tgt_len[i], cfg.drift, cfg.amplitude_spread, cfg.label_noise, lat_t));
    }
  }

  GeneratedPair out;
  out.source = observe(sp, src_runs, cfg, cfg.paired_latents ? 0.0 : cfg.label_outlier_fraction, src_rng);
  out.target = observe(tp, tgt_runs, cfg, cfg.paired_latents ? 0.0 : cfg.label_outlier_fraction, tgt_rng);
  out.truth = {sp.mixing, tp.mixing, sp.offset, tp.offset};
  return out;
}

// --- preprocessing -----------------------------------------------------------

nlohmann::json PreprocessParams::to_json() const {
  return {{"fluctuation_threshold", fluctuation_threshold},
          {"slope_threshold", slope_threshold},
          {"noise_constant_share", noise_constant_share},
          {"iqr_multiplier", iqr_multiplier},
          {"length_low_quantile", length_low_quantile},
          {"length_high_quantile", length_high_quantile},
          {"normalize", normalize}};
}

PreprocessParams PreprocessParams::from_json(const nlohmann::json& j) {
  PreprocessParams p;
  p.fluctuation_threshold = j.value("fluctuation_threshold", p.fluctuation_threshold);
  p.slope_threshold = j.value("slope_threshold", p.slope_threshold);
  p.noise_constant_share = j.value("noise_constant_share", p.noise_constant_share);
  p.iqr_multiplier = j.value("iqr_multiplier", p.iqr_multiplier);
  p.length_low_quantile = j.value("length_low_quantile", p.length_low_quantile);
  p.length_high_quantile = j.value("length_high_quantile", p.length_high_quantile);
  p.normalize = j.value("normalize", p.normalize);
  return p;
}

double quantile(std::vector<double> v, double q) {
  require(!v.empty(), ErrorKind::data, "quantile of empty data");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Mat resample_linear(const Mat& values, std::size_t length) {
  require(length >= 1, ErrorKind::contract, "resample length must be positive");
  const Eigen::Index n = values.rows();
  require(n >= 1, ErrorKind::data, "cannot resample an empty series");
  Mat out(static_cast<Eigen::Index>(length), values.cols());
  for (std::size_t t = 0; t < length; ++t) {
    const double pos = length == 1 ? 0.0 : static_cast<double>(t) * static_cast<double>(n - 1) / static_cast<double>(length - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index hi = std::min(lo + 1, n - 1);
    const double w = pos - static_cast<double>(lo);
    out.row(static_cast<Eigen::Index>(t)) = (1.0 - w) * values.row(lo) + w * values.row(hi);
  }
  return out;
}

namespace {

// Least-squares slope of a series against its step index.
double trend_slope(const Eigen::VectorXd& y) {
  const auto n = static_cast<double>(y.size());
  if (y.size() < 2) return 0.0;
  const double tm = (n - 1.0) / 2.0;
  double num = 0.0, den = 0.0;
  const double ym = y.mean();
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    const double dt = static_cast<double>(t) - tm;
    num += dt * (y(t) - ym);
    den += dt * dt;
  }
  return num / den;
}

DomainDataset keep_channels(const DomainDataset& ds, const std::vector<std::size_t>& keep) {
  DomainDataset out = ds;
  out.channel_names.clear();
  for (std::size_t c : keep) out.channel_names.push_back(ds.channel_names[c]);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Mat& v = ds.samples[i].values;
    Mat nv(v.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) nv.col(static_cast<Eigen::Index>(k)) = v.col(static_cast<Eigen::Index>(keep[k]));
    out.samples[i].values = std::move(nv);
  }
  return out;
}

void check_not_collapsed(const DomainDataset& ds, const std::string& step) {
  if (ds.channels() == 0) fail(ErrorKind::data, "preprocess collapsed: step '" + step + "' removed every channel");
  if (ds.size() == 0) fail(ErrorKind::data, "preprocess collapsed: step '" + step + "' removed every sample");
}

}  // namespace

DomainDataset preprocess(const DomainDataset& raw, const PreprocessParams& params) {
  require(!raw.samples.empty(), ErrorKind::data, "preprocess: dataset has no samples");
  for (const auto& s : raw.samples) {
    require(static_cast<std::size_t>(s.values.cols()) == raw.channels(), ErrorKind::shape,
            "preprocess: sample " + std::to_string(s.id) + " has wrong channel count");
    require(s.values.rows() >= 1 && s.values.allFinite(), ErrorKind::data,
            "preprocess: sample " + std::to_string(s.id) + " is empty or non-finite");
  }
  DomainDataset ds = raw;

  // 1. channels constant over every sample and time step
  {
    std::vector<std::size_t> keep;
    StepRecord rec{"remove_constant_channels", "drop channels with a single value across all samples", {}, {}};
    for (std::size_t c = 0; c < ds.channels(); ++c) {
      const double ref = ds.samples[0].values(0, static_cast<Eigen::Index>(c));
      bool constant = true;
      for (const auto& s : ds.samples) {
        if ((s.values.col(static_cast<Eigen::Index>(c)).array() != ref).any()) {
          constant = false;
          break;
        }
      }
      if (constant) rec.removed.push_back(ds.channel_names[c]);
      else keep.push_back(c);
    }
    ds = keep_channels(ds, keep);
    ds.log.push_back(rec);
    check_not_collapsed(ds, rec.step);
  }

  // 2. channels that merely jitter around a constant level
  {
    std::vector<std::size_t> keep;
    StepRecord rec{"remove_noise_constant_channels", "drop channels whose per-sample range and trend stay below threshold",
                   {}, {{"fluctuation_threshold", params.fluctuation_threshold},
                        {"slope_threshold", params.slope_threshold},
                        {"sample_share", params.noise_constant_share}}};
    for (std::size_t c = 0; c < ds.channels(); ++c) {
      std::size_t flat = 0;
      for (const auto& s : ds.samples) {
        const Eigen::VectorXd y = s.values.col(static_cast<Eigen::Index>(c));
        if (y.maxCoeff() - y.minCoeff() < params.fluctuation_threshold && std::abs(trend_slope(y)) < params.slope_threshold) ++flat;
      }
      if (static_cast<double>(flat) >= params.noise_constant_share * static_cast<double>(ds.size())) {
        rec.removed.push_back(ds.channel_names[c]);
      } else {
        keep.push_back(c);
      }
    }
    ds = keep_channels(ds, keep);
    ds.log.push_back(rec);
    check_not_collapsed(ds, rec.step);
  }

  // 3. label outliers by the interquartile fence
  {
    const auto y = ds.labels();
    const double q1 = quantile(y, 0.25), q3 = quantile(y, 0.75);
    const double lo = q1 - params.iqr_multiplier * (q3 - q1), hi = q3 + params.iqr_multiplier * (q3 - q1);
    StepRecord rec{"remove_label_outliers", "drop samples with labels outside the IQR fences", {},
                   {{"q1", q1}, {"q3", q3}, {"lower", lo}, {"upper", hi}, {"multiplier", params.iqr_multiplier}}};
    std::vector<SeriesSample> kept;
    for (auto& s : ds.samples) {
      if (s.label < lo || s.label > hi) rec.removed.push_back(std::to_string(s.id));
      else kept.push_back(std::move(s));
    }
    ds.samples = std::move(kept);
    ds.log.push_back(rec);
    check_not_collapsed(ds, rec.step);
  }

  // 4. runs that are unusually short or long
  {
    std::vector<double> len;
    for (const auto& s : ds.samples) len.push_back(static_cast<double>(s.values.rows()));
    const double lo = quantile(len, params.length_low_quantile), hi = quantile(len, params.length_high_quantile);
    StepRecord rec{"remove_length_outliers", "drop samples whose length lies outside the quantile band", {},
                   {{"lower", lo}, {"upper", hi}}};
    std::vector<SeriesSample> kept;
    for (auto& s : ds.samples) {
      const auto n = static_cast<double>(s.values.rows());
      if (n < lo || n > hi) rec.removed.push_back(std::to_string(s.id));
      else kept.push_back(std::move(s));
    }
    ds.samples = std::move(kept);
    ds.log.push_back(rec);
    check_not_collapsed(ds, rec.step);
  }

  // 5. uniform re-gridding to the median retained length
  {
    std::vector<double> len;
    for (const auto& s : ds.samples) len.push_back(static_cast<double>(s.values.rows()));
    const auto T = static_cast<std::size_t>(std::lround(quantile(len, 0.5)));
    for (auto& s : ds.samples) {
      if (static_cast<std::size_t>(s.values.rows()) != T) s.values = resample_linear(s.values, T);
    }
    ds.log.push_back({"resample", "linear interpolation onto a uniform grid", {}, {{"length", T}}});
  }

  if (params.normalize) {
    const Normalizer n = fit_normalizer(ds);
    ds = apply_normalizer(ds, n);
    ds.log.push_back({"normalize_channels", "per-channel min-max scaling to [0, 1]", {}, {{"constants", n.to_json()}}});
    ds = normalize_labels(ds);
    ds.log.push_back({"normalize_labels", "label min-max scaling to [0, 1]", {},
                      {{"min", ds.label_scale.min}, {"max", ds.label_scale.max}}});
  }
  return ds;
}

Normalizer fit_normalizer(const DomainDataset& ds) {
  require(!ds.samples.empty(), ErrorKind::data, "cannot fit a normalizer on an empty dataset");
  Normalizer n;
  for (std::size_t c = 0; c < ds.channels(); ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : ds.samples) {
      lo = std::min(lo, s.values.col(static_cast<Eigen::Index>(c)).minCoeff());
      hi = std::max(hi, s.values.col(static_cast<Eigen::Index>(c)).maxCoeff());
    }
    n.channels.push_back({lo, hi});
  }
  return n;
}

DomainDataset apply_normalizer(const DomainDataset& ds, const Normalizer& n) {
  require(n.channels.size() == ds.channels(), ErrorKind::shape, "normalizer channel count disagrees with dataset");
  DomainDataset out = ds;
  for (auto& s : out.samples) {
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
      const MinMax& m = n.channels[static_cast<std::size_t>(c)];
      for (Eigen::Index t = 0; t < s.values.rows(); ++t) s.values(t, c) = m.apply(s.values(t, c));
    }
  }
  out.channel_scale = n;
  return out;
}

DomainDataset normalize_labels(const DomainDataset& ds) {
  require(!ds.samples.empty(), ErrorKind::data, "cannot normalize labels of an empty dataset");
  DomainDataset out = ds;
  const auto y = ds.labels();
  out.label_scale = {*std::min_element(y.begin(), y.end()), *std::max_element(y.begin(), y.end())};
  for (auto& s : out.samples) s.label = out.label_scale.apply(s.label);
  out.labels_normalized = true;
  return out;
}

// --- folds -------------------------------------------------------------------

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  require(k >= 2, ErrorKind::config, "k-fold split needs k >= 2");
  require(n >= k, ErrorKind::data, "k-fold split: " + std::to_string(n) + " samples for " + std::to_string(k) + " folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Fold> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].test.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].test.begin(), folds[f].test.end());
    pos += size;
  }
  for (auto& f : folds) {
    std::vector<bool> in_test(n, false);
    for (std::size_t i : f.test) in_test[i] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!in_test[i]) f.train.push_back(i);
  }
  return folds;
}

// --- IO ------------------------------------------------------------------------

namespace {

constexpr const char* kFormat = "hda.dataset";
constexpr int kVersion = 1;

std::string sample_file(std::uint64_t id) { return "samples/sample_" + std::to_string(id) + ".csv"; }

nlohmann::json step_to_json(const StepRecord& r) {
  return {{"step", r.step}, {"detail", r.detail}, {"removed", r.removed}, {"params", r.params}};
}

StepRecord step_from_json(const nlohmann::json& j) {
  return {j.at("step").get<std::string>(), j.at("detail").get<std::string>(),
          j.at("removed").get<std::vector<std::string>>(), j.at("params")};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    fail(ErrorKind::data, file.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'", file.string());
  }
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) fail(ErrorKind::data, "missing file: " + file.string(), file.string());
  std::ifstream in(file);
  if (!in) fail(ErrorKind::data, "cannot open " + file.string(), file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

void save_dataset(const DomainDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "samples");
  nlohmann::json m;
  m["format"] = kFormat;
  m["version"] = kVersion;
  m["domain"] = ds.domain;
  m["channels"] = ds.channel_names;
  m["label_scale"] = {{"min", ds.label_scale.min}, {"max", ds.label_scale.max}};
  m["labels_normalized"] = ds.labels_normalized;
  m["channel_scale"] = ds.channel_scale.to_json();
  m["preprocessing_log"] = nlohmann::json::array();
  for (const auto& r : ds.log) m["preprocessing_log"].push_back(step_to_json(r));
  m["samples"] = nlohmann::json::array();
  std::string labels = "id,label\n";
  for (const auto& s : ds.samples) {
    m["samples"].push_back({{"id", s.id},
                            {"file", sample_file(s.id)},
                            {"raw_length", s.raw_length},
                            {"time", static_cast<std::size_t>(s.values.rows())}});
    labels += std::to_string(s.id) + "," + format_double(s.label) + "\n";
    std::string csv = "t";
    for (const auto& c : ds.channel_names) csv += "," + c;
    csv += "\n";
    for (Eigen::Index t = 0; t < s.values.rows(); ++t) {
      csv += std::to_string(t);
      for (Eigen::Index c = 0; c < s.values.cols(); ++c) csv += "," + format_double(s.values(t, c));
      csv += "\n";
    }
    write_text_file(dir / sample_file(s.id), csv);
  }
  write_text_file(dir / "labels.csv", labels);
  write_json_file(dir / "manifest.json", m);
}

DomainDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const nlohmann::json m = read_json_file(manifest_path);
  DomainDataset ds;
  std::vector<std::tuple<std::uint64_t, std::string, std::size_t, std::size_t>> index;
  try {
    if (m.at("format").get<std::string>() != kFormat || m.at("version").get<int>() != kVersion) {
      fail(ErrorKind::data, manifest_path.string() + ": not an hda.dataset v1 manifest", manifest_path.string());
    }
    ds.domain = m.at("domain").get<std::string>();
    ds.channel_names = m.at("channels").get<std::vector<std::string>>();
    ds.label_scale = {m.at("label_scale").at("min").get<double>(), m.at("label_scale").at("max").get<double>()};
    ds.labels_normalized = m.at("labels_normalized").get<bool>();
    ds.channel_scale = Normalizer::from_json(m.at("channel_scale"));
    for (const auto& r : m.at("preprocessing_log")) ds.log.push_back(step_from_json(r));
    for (const auto& s : m.at("samples")) {
      index.emplace_back(s.at("id").get<std::uint64_t>(), s.at("file").get<std::string>(),
                         s.at("raw_length").get<std::size_t>(), s.at("time").get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, manifest_path.string() + ": malformed manifest: " + e.what(), manifest_path.string());
  }

  const auto label_path = dir / "labels.csv";
  const auto label_lines = read_lines(label_path);
  if (label_lines.empty() || label_lines[0] != "id,label") {
    fail(ErrorKind::data, label_path.string() + ": expected header 'id,label'", label_path.string());
  }
  if (label_lines.size() - 1 != index.size()) {
    fail(ErrorKind::data, label_path.string() + ": row count disagrees with manifest", label_path.string());
  }

  const std::size_t C = ds.channel_names.size();
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& [id, file, raw_length, time] = index[i];
    const auto lab = split_csv(label_lines[i + 1]);
    if (lab.size() != 2 || lab[0] != std::to_string(id)) {
      fail(ErrorKind::data, label_path.string() + ":" + std::to_string(i + 2) + ": expected id " + std::to_string(id),
           label_path.string());
    }
    SeriesSample s;
    s.id = id;
    s.raw_length = raw_length;
    s.label = parse_double(lab[1], label_path, i + 2);
    const auto path = dir / file;
    const auto lines = read_lines(path);
    if (lines.empty()) fail(ErrorKind::data, path.string() + ": empty sample file", path.string());
    const auto header = split_csv(lines[0]);
    if (header.size() != C + 1) {
      fail(ErrorKind::data,
           path.string() + ": expected " + std::to_string(C + 1) + " columns, found " + std::to_string(header.size()),
           path.string());
    }
    for (std::size_t c = 0; c < C; ++c) {
      if (header[c + 1] != ds.channel_names[c]) {
        fail(ErrorKind::data, path.string() + ": column '" + header[c + 1] + "' does not match manifest channel '" +
                                  ds.channel_names[c] + "'", path.string());
      }
    }
    if (lines.size() - 1 != time) {
      fail(ErrorKind::data, path.string() + ": expected " + std::to_string(time) + " rows, found " +
                                std::to_string(lines.size() - 1), path.string());
    }
    s.values.resize(static_cast<Eigen::Index>(time), static_cast<Eigen::Index>(C));
    for (std::size_t t = 0; t < time; ++t) {
      const auto row = split_csv(lines[t + 1]);
      if (row.size() != C + 1) {
        fail(ErrorKind::data, path.string() + ":" + std::to_string(t + 2) + ": expected " + std::to_string(C + 1) +
                                  " columns, found " + std::to_string(row.size()), path.string());
      }
      for (std::size_t c = 0; c < C; ++c)
        s.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = parse_double(row[c + 1], path, t + 2);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace hda::data
