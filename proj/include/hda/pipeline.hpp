#pragma once
// Experiment orchestration behind the command line: configuration, the run
// directory layout, per-fold training and evaluation, and report emission.
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hda/baselines.hpp"
#include "hda/datasets.hpp"
#include "hda/dbacs.hpp"
#include "hda/metrics.hpp"
#include "json.hpp"

namespace hda::pipeline {

namespace fs = std::filesystem;

// --- configuration -----------------------------------------------------------

struct BaselineSettings {
  double variance_threshold = 0.95;
  std::size_t cca_components = 0;  // 0 = pick from the held-out grid
  std::size_t cca_grid_step = 5;
  dbacs::PredictorSchedule predictor;
};

struct MatchSettings {
  std::size_t fold = 0;
  bool plots = true;
};

// Every component seed is derived from `seed` (see derived_seed).
struct RunConfig {
  std::uint64_t seed = 1;
  std::string preset = "desk";
  data::GeneratorConfig generator;
  data::PreprocessParams preprocessing;
  dbacs::LossWeights weights;
  dbacs::TrainSchedule schedule;
  dbacs::PredictorSchedule predictor;
  std::size_t folds = 5;
  BaselineSettings baselines;
  MatchSettings match;

  nlohmann::json to_json() const;
  // Validates against the schema first; unknown keys and type errors raise
  // ErrorKind::config with the JSON pointer of the offending value.
  static RunConfig from_json(const nlohmann::json& j);
};

// JSON Schema (draft 2020-12) of the configuration file.
nlohmann::json config_schema();

// Throws ErrorKind::config naming the first offending JSON pointer.
void validate_config(const nlohmann::json& j);

enum class SeedUse : std::uint64_t {
  cv_source = 101,
  cv_target = 102,
  model = 201,
  schedule = 202,
  predictor = 301,
  baseline_predictor = 302,
  cca_grid = 303,
  fid = 401,
};
std::uint64_t derived_seed(std::uint64_t master, SeedUse use, std::size_t fold = 0);

// --- run directory ---------------------------------------------------------------

struct RunDir {
  fs::path root;
  fs::path snapshot() const { return root / "config_snapshot.json"; }
  fs::path metrics() const { return root / "metrics.json"; }
  fs::path timing() const { return root / "timing.json"; }
  fs::path raw(const std::string& domain) const { return root / "data" / "raw" / domain; }
  fs::path clean(const std::string& domain) const { return root / "data" / "clean" / domain; }
  fs::path fold_checkpoints(std::size_t k) const { return root / "checkpoints" / ("fold_" + std::to_string(k)); }
  fs::path fold_logs(std::size_t k) const { return root / "logs" / ("fold_" + std::to_string(k)); }
  fs::path tables() const { return root / "tables"; }
  fs::path plots() const { return root / "plots"; }
  fs::path match() const { return root / "match"; }
};

// Writes the snapshot, or checks that an existing one is identical.
void claim_run_dir(const RunDir& dir, const RunConfig& cfg);

// Replaces one top-level section of metrics.json (other sections are kept).
void write_metrics_section(const RunDir& dir, const std::string& section, const nlohmann::json& value);
nlohmann::json read_metrics_section(const RunDir& dir, const std::string& section);

// --- fold data -------------------------------------------------------------------------

struct DomainFold {
  data::DomainDataset train, test;  // channels renormalized on the train split
  nn::Tensor x_train, x_test;
  std::vector<double> y_train, y_test;
};

struct FoldData {
  std::size_t index = 0;
  DomainFold source, target;
};

struct CleanData {
  data::DomainDataset source, target;
};
CleanData load_clean(const RunDir& dir);

FoldData make_fold(const CleanData& d, const RunConfig& cfg, std::size_t k);

// --- training ----------------------------------------------------------------------------

using Progress = std::function<void(const std::string&)>;

// Dedicated predictors, SSIM pretraining and adversarial training for one
// fold. Writes checkpoints and logs under the fold directories and returns a
// summary fragment.
nlohmann::json train_dbacs_fold(const RunDir& dir, const RunConfig& cfg, const FoldData& f, const Progress& log);

// kind: "pca" or "cca". Fits the subspaces, the CORAL map and the latent
// predictors for one fold.
nlohmann::json train_baseline_fold(const RunDir& dir, const RunConfig& cfg, const FoldData& f, const std::string& kind,
                                   const Progress& log);

// --- evaluation ------------------------------------------------------------------------

struct FoldEvaluation {
  metrics::MaeTable table1;
  std::optional<metrics::MaeTable> pca, cca;
  nlohmann::json fid_train, fid_test;
  nlohmann::json pearson;
  std::string p_hash_dedicated, p_hash_dbacs;
  nlohmann::json to_json() const;
};

FoldEvaluation evaluate_fold(const RunDir& dir, const RunConfig& cfg, const FoldData& f);

// --- commands ------------------------------------------------------------------------------

struct CommandOptions {
  std::size_t jobs = 1;
  bool quiet = false;
};

void cmd_gen_data(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o);
void cmd_preprocess(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o);
void cmd_train(const RunDir& dir, const RunConfig& cfg, const std::string& method, const CommandOptions& o);
void cmd_eval(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o);
void cmd_match(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o);
void cmd_report(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o);
// All of the above in order (train runs dbacs, pca-coral and cca).
void cmd_pipeline(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o);

// Runs fn(0..n-1) on up to `jobs` threads; rethrows the lowest-index failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace hda::pipeline
