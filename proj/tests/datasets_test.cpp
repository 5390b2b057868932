#include "hda/datasets.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "hda/error.hpp"
#include "hda/json_io.hpp"

using namespace hda;
using namespace hda::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hda_datasets_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.source_samples = 120;
  c.target_samples = 80;
  return c;
}

DomainDataset toy(std::vector<double> labels, std::size_t channels = 2, std::size_t time = 5) {
  DomainDataset ds;
  ds.domain = "source";
  for (std::size_t c = 0; c < channels; ++c) ds.channel_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SeriesSample s;
    s.id = i;
    s.label = labels[i];
    s.raw_length = time;
    s.values = Mat::Zero(static_cast<Eigen::Index>(time), static_cast<Eigen::Index>(channels));
    for (std::size_t t = 0; t < time; ++t) s.values(static_cast<Eigen::Index>(t), 0) = static_cast<double>(t + i);
    ds.samples.push_back(s);
  }
  return ds;
}

}  // namespace

TEST(Generator, SameSeedIsBitwiseIdentical) {
  const auto a = generate_pair(small_config());
  const auto b = generate_pair(small_config());
  ASSERT_EQ(a.source.size(), b.source.size());
  for (std::size_t i = 0; i < a.source.size(); ++i) {
    EXPECT_EQ(a.source.samples[i].label, b.source.samples[i].label);
    EXPECT_TRUE(a.source.samples[i].values == b.source.samples[i].values);
  }
  for (std::size_t i = 0; i < a.target.size(); ++i) EXPECT_TRUE(a.target.samples[i].values == b.target.samples[i].values);
}

TEST(Generator, DefaultSampleRatioAndHeterogeneity) {
  const GeneratorConfig c;
  EXPECT_EQ(c.source_samples, 1000u);
  EXPECT_EQ(c.target_samples, 600u);
  auto cfg = small_config();
  const auto p = generate_pair(cfg);
  EXPECT_EQ(p.source.channels(), 16u);
  EXPECT_EQ(p.target.channels(), 24u);
  cfg.target_channels = cfg.source_channels;
  cfg.target_constant = cfg.source_constant;
  cfg.target_noise_constant = cfg.source_noise_constant;
  try {
    generate_pair(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(Generator, RejectsTinyCounts) {
  auto cfg = small_config();
  cfg.target_samples = 49;
  EXPECT_THROW(generate_pair(cfg), Error);
}

// Noise-free linear observation: the label (time-mean of a latent channel) is
// an exact linear functional of each domain's flattened series.
TEST(Generator, NoiseFreeLabelIsLinearlyRecoverable) {
  auto cfg = small_config();
  cfg.channel_noise = 0.0;
  cfg.label_noise = 0.0;
  cfg.length_jitter = false;
  cfg.label_outlier_fraction = 0.0;
  cfg.source_samples = 400;
  cfg.target_samples = 400;
  const auto p = generate_pair(cfg);
  for (const DomainDataset* ds : {&p.source, &p.target}) {
    const std::size_t n = ds->size();
    const auto C = static_cast<Eigen::Index>(ds == &p.target ? cfg.target_channels : cfg.source_channels);
    // time-mean of each informative channel is enough: the label is linear
    // in the time-mean of the latent, which is linear in channel means.
    Mat X(static_cast<Eigen::Index>(n), C + 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      X.row(static_cast<Eigen::Index>(i)).head(C) = ds->samples[i].values.leftCols(C).colwise().mean();
      X(static_cast<Eigen::Index>(i), C) = 1.0;
      y(static_cast<Eigen::Index>(i)) = ds->samples[i].label;
    }
    const Eigen::VectorXd w = X.colPivHouseholderQr().solve(y);
    const double ss_res = (X * w - y).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
    EXPECT_GE(1.0 - ss_res / ss_tot, 0.99) << ds->domain;
  }
}

TEST(Generator, PairedLatentsShareLabels) {
  auto cfg = small_config();
  cfg.paired_latents = true;
  const auto p = generate_pair(cfg);
  for (std::size_t i = 0; i < p.target.size(); ++i) EXPECT_EQ(p.source.samples[i].label, p.target.samples[i].label);
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.9), 7.0);
}

TEST(Resample, EndpointsAndMidpoints) {
  Mat v(3, 1);
  v << 0, 2, 4;
  const Mat r = resample_linear(v, 5);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(r(i, 0), i);
  EXPECT_TRUE(resample_linear(v, 3) == v);
}

TEST(Preprocess, DropsAllZeroChannel) {
  auto ds = toy({0.1, 0.2, 0.3, 0.4, 0.5}, 3);
  for (auto& s : ds.samples) s.values.col(2).setRandom();
  const auto out = preprocess(ds);
  EXPECT_EQ(out.channel_names, (std::vector<std::string>{"c0", "c2"}));
  EXPECT_EQ(out.log[0].removed, std::vector<std::string>{"c1"});
}

TEST(Preprocess, ZeroIqrRemovesTheOutlier) {
  auto ds = toy({0.5, 0.5, 0.5, 0.5, 10});
  for (auto& s : ds.samples) s.values.col(1).setRandom();
  const auto out = preprocess(ds);
  ASSERT_EQ(out.size(), 4u);
  for (const auto& s : out.samples) EXPECT_NE(s.id, 4u);
}

TEST(Preprocess, CollapseIsAnError) {
  const auto ds = toy({0.1, 0.2, 0.3}, 2);
  auto flat = ds;
  for (auto& s : flat.samples) s.values.setZero();
  try {
    preprocess(flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("collapsed"), std::string::npos);
  }
}

TEST(Preprocess, FrozenFixtureMatchesLiteralOracle) {
  const fs::path dir = fs::path(HDA_FIXTURE_DIR);
  const auto raw = load_dataset(dir / "preprocess_raw");
  const auto expected = read_json_file(dir / "preprocess_expected.json");
  const auto out = preprocess(raw);
  ASSERT_GE(out.log.size(), 5u);
  EXPECT_EQ(out.log[0].step, "remove_constant_channels");
  EXPECT_EQ(out.log[0].removed, expected["removed_constant"].get<std::vector<std::string>>());
  EXPECT_EQ(out.log[1].removed, expected["removed_noise_constant"].get<std::vector<std::string>>());
  EXPECT_EQ(out.log[2].removed, expected["removed_label_outliers"].get<std::vector<std::string>>());
  EXPECT_EQ(out.log[3].removed, expected["removed_length_outliers"].get<std::vector<std::string>>());
  EXPECT_EQ(out.channel_names, expected["kept_channels"].get<std::vector<std::string>>());
  std::vector<std::size_t> ids;
  for (const auto& s : out.samples) ids.push_back(s.id);
  EXPECT_EQ(ids, expected["kept_samples"].get<std::vector<std::size_t>>());
  EXPECT_EQ(out.time(), expected["time"].get<std::size_t>());
}

TEST(Preprocess, PermutationChangesOnlyOrder) {
  const auto raw = generate_pair(small_config()).source;
  auto shuffled = raw;
  std::reverse(shuffled.samples.begin(), shuffled.samples.end());
  const auto a = preprocess(raw);
  const auto b = preprocess(shuffled);
  EXPECT_EQ(a.channel_names, b.channel_names);
  std::set<std::uint64_t> ia, ib;
  for (const auto& s : a.samples) ia.insert(s.id);
  for (const auto& s : b.samples) ib.insert(s.id);
  EXPECT_EQ(ia, ib);
}

TEST(Preprocess, GeneratedPlantsAreRemovedExactly) {
  const auto p = generate_pair(small_config());
  const auto s = preprocess(p.source);
  const auto t = preprocess(p.target);
  EXPECT_EQ(s.channels(), 14u);
  EXPECT_EQ(t.channels(), 20u);
  EXPECT_EQ(s.time(), 32u);
  EXPECT_EQ(t.time(), 32u);
  for (const auto* ds : {&s, &t}) {
    for (const auto& smp : ds->samples) {
      EXPECT_GE(smp.values.minCoeff(), 0.0);
      EXPECT_LE(smp.values.maxCoeff(), 1.0);
      EXPECT_GE(smp.label, 0.0);
      EXPECT_LE(smp.label, 1.0);
    }
  }
}

TEST(Normalizer, FitOnTrainOnly) {
  const auto ds = preprocess(generate_pair(small_config()).source);
  const auto folds = kfold_split(ds.size(), 5, 3);
  const Normalizer n = fit_normalizer(subset(ds, folds[0].train));
  const auto test = apply_normalizer(subset(ds, folds[0].test), n);
  EXPECT_EQ(test.channel_scale.hash(), n.hash());
  const auto train = apply_normalizer(subset(ds, folds[0].train), n);
  for (const auto& s : train.samples) {
    EXPECT_GE(s.values.minCoeff(), 0.0);
    EXPECT_LE(s.values.maxCoeff(), 1.0);
  }
}

TEST(KFold, TenSamplesFiveFolds) {
  const auto folds = kfold_split(10, 5, 1);
  ASSERT_EQ(folds.size(), 5u);
  std::set<std::size_t> all;
  for (const auto& f : folds) {
    EXPECT_EQ(f.test.size(), 2u);
    EXPECT_EQ(f.train.size(), 8u);
    all.insert(f.test.begin(), f.test.end());
  }
  EXPECT_EQ(all.size(), 10u);
}

TEST(KFold, DeterministicAndExhaustive) {
  const auto a = kfold_split(103, 5, 9);
  const auto b = kfold_split(103, 5, 9);
  std::vector<int> seen(103, 0);
  for (std::size_t f = 0; f < 5; ++f) {
    EXPECT_EQ(a[f].test, b[f].test);
    EXPECT_TRUE(a[f].test.size() == 20 || a[f].test.size() == 21);
    for (std::size_t i : a[f].test) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(kfold_split(3, 5, 1), Error);
}

TEST(DatasetIo, RoundTripIsLosslessAndManifestStable) {
  const auto ds = preprocess(generate_pair(small_config()).target);
  const fs::path a = temp_dir("rt_a"), b = temp_dir("rt_b");
  save_dataset(ds, a);
  const auto loaded = load_dataset(a);
  save_dataset(loaded, b);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  ASSERT_EQ(loaded.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(loaded.samples[i].label, ds.samples[i].label);
    EXPECT_LE((loaded.samples[i].values - ds.samples[i].values).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DatasetIo, LabelsFollowManifestOrder) {
  const auto ds = preprocess(generate_pair(small_config()).source);
  const fs::path dir = temp_dir("labels");
  save_dataset(ds, dir);
  const auto manifest = read_json_file(dir / "manifest.json");
  std::ifstream in(dir / "labels.csv");
  std::string line;
  std::getline(in, line);
  for (const auto& s : manifest["samples"]) {
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(s["id"].get<std::uint64_t>()));
  }
}

TEST(DatasetIo, CorruptSampleNamesTheFile) {
  const auto ds = preprocess(generate_pair(small_config()).source);
  const fs::path dir = temp_dir("corrupt");
  save_dataset(ds, dir);
  const fs::path victim = dir / ("samples/sample_" + std::to_string(ds.samples[3].id) + ".csv");
  std::string text = slurp(victim);
  // drop the last column of the third data row
  std::stringstream in(text);
  std::string out, line;
  int row = 0;
  while (std::getline(in, line)) {
    if (row++ == 3) line = line.substr(0, line.rfind(','));
    out += line + "\n";
  }
  write_text_file(victim, out);
  try {
    load_dataset(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find(victim.filename().string()), std::string::npos);
  }
}

TEST(DatasetIo, MissingManifestIsMissingArtifact) {
  try {
    load_dataset(temp_dir("nothing"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_artifact);
  }
}
