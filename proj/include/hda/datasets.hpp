#pragma once
// Dual-equipment time-series data: samples, the synthetic generator, the
// cleaning pipeline, cross-validation splits and the on-disk format.
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hda/linalg.hpp"
#include "hda/nn/tensor.hpp"
#include "json.hpp"

namespace hda::data {

using linalg::Mat;

struct SeriesSample {
  std::uint64_t id = 0;
  Mat values;  // time x channels
  double label = 0.0;
  std::size_t raw_length = 0;
};

// One applied preprocessing step. `removed` lists dropped channel names or
// sample ids depending on the step.
struct StepRecord {
  std::string step;
  std::string detail;
  std::vector<std::string> removed;
  nlohmann::json params = nlohmann::json::object();
};

struct MinMax {
  double min = 0.0;
  double max = 1.0;
  double apply(double v) const { return max > min ? (v - min) / (max - min) : 0.0; }
  double invert(double v) const { return min + v * (max - min); }
};

// Per-channel min-max scaling.
struct Normalizer {
  std::vector<MinMax> channels;
  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
};

struct DomainDataset {
  std::string domain;  // "source" or "target"
  std::vector<std::string> channel_names;
  std::vector<SeriesSample> samples;
  std::vector<StepRecord> log;
  MinMax label_scale{0.0, 1.0};
  bool labels_normalized = false;
  Normalizer channel_scale;  // empty until preprocess normalizes channels

  std::size_t size() const { return samples.size(); }
  std::size_t channels() const { return channel_names.size(); }
  // Common series length; throws if samples disagree.
  std::size_t time() const;
  std::vector<double> labels() const;
};

// Copies the selected samples (metadata is kept).
DomainDataset subset(const DomainDataset& ds, const std::vector<std::size_t>& indices);
// Stacks equal-length samples into a batch tensor (B x T x C).
nn::Tensor to_tensor(const DomainDataset& ds);
nn::Tensor to_tensor(const DomainDataset& ds, const std::vector<std::size_t>& indices);

// --- synthetic benchmark ---------------------------------------------------

struct GeneratorConfig {
  std::size_t latent_dim = 5;
  std::size_t source_channels = 14;  // informative channels
  std::size_t target_channels = 20;
  std::size_t source_constant = 1;        // planted constant channels
  std::size_t source_noise_constant = 1;  // planted near-constant channels
  std::size_t target_constant = 2;
  std::size_t target_noise_constant = 2;
  std::size_t time_steps = 32;
  std::size_t source_samples = 1000;
  std::size_t target_samples = 600;
  double channel_noise = 0.05;
  double label_noise = 0.15;
  double drift = 0.1;
  double amplitude_spread = 0.1;  // run-to-run sd of the non-label latent amplitudes
  bool nonlinear = false;  // mild tanh warp after mixing
  bool length_jitter = true;
  double length_outlier_fraction = 0.1;
  double label_outlier_fraction = 0.01;
  // Draw identical latent trajectories (and labels) for the first
  // min(n_S, n_T) samples of both domains. Used to construct scenarios with
  // a known exact cross-domain map.
  bool paired_latents = false;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

// Ground truth of one generated pair: x = M z + b per time step (before the
// optional warp and noise), informative channels first.
struct GeneratorTruth {
  Mat source_mixing;  // C_S x L
  Mat target_mixing;  // C_T x L
  linalg::Vec source_offset;
  linalg::Vec target_offset;
};

struct GeneratedPair {
  DomainDataset source;
  DomainDataset target;
  GeneratorTruth truth;
};

GeneratedPair generate_pair(const GeneratorConfig& cfg);

// --- preprocessing -----------------------------------------------------------

struct PreprocessParams {
  double fluctuation_threshold = 0.01;
  double slope_threshold = 1e-4;
  double noise_constant_share = 0.95;
  double iqr_multiplier = 1.5;
  double length_low_quantile = 0.25;
  double length_high_quantile = 0.75;
  bool normalize = true;

  nlohmann::json to_json() const;
  static PreprocessParams from_json(const nlohmann::json& j);
};

// Linear-interpolation quantile of unsorted data (the "type 7" estimator).
double quantile(std::vector<double> v, double q);

// Resamples a T_raw x C series to `length` steps on a uniform grid.
Mat resample_linear(const Mat& values, std::size_t length);

// Applies the five cleaning steps in order, then (optionally) min-max
// normalization of channels and labels. Throws ErrorKind::data when a step
// removes every channel or every sample.
DomainDataset preprocess(const DomainDataset& raw, const PreprocessParams& params = {});

Normalizer fit_normalizer(const DomainDataset& ds);
DomainDataset apply_normalizer(const DomainDataset& ds, const Normalizer& n);
// Min-max scales the labels into [0, 1] using the dataset's own range.
DomainDataset normalize_labels(const DomainDataset& ds);

// --- cross-validation --------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

// --- IO ------------------------------------------------------------------------

// Directory layout: manifest.json, labels.csv, samples/sample_<id>.csv.
void save_dataset(const DomainDataset& ds, const std::filesystem::path& dir);
DomainDataset load_dataset(const std::filesystem::path& dir);

}  // namespace hda::data
