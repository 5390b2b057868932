#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "hda/error.hpp"
#include "hda/json_io.hpp"
#include "hda/matching.hpp"
#include "hda/nn/checkpoint.hpp"
#include "hda/pipeline.hpp"
#include "hda/svg.hpp"

namespace hda::pipeline {

using nlohmann::json;
using nn::Tensor;

namespace {

std::mutex log_mutex;

Progress logger(const CommandOptions& o, const std::string& prefix) {
  return [quiet = o.quiet, prefix](const std::string& msg) {
    if (quiet) return;
    std::lock_guard lock(log_mutex);
    std::fprintf(stderr, "%s%s\n", prefix.c_str(), msg.c_str());
  };
}

class Timer {
 public:
  Timer(const RunDir& dir, std::string name) : dir_(dir), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
  ~Timer() {
    try {
      json t = fs::exists(dir_.timing()) ? read_json_file(dir_.timing()) : json::object();
      t[name_] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
      write_json_file(dir_.timing(), t);
    } catch (...) {
    }
  }

 private:
  const RunDir& dir_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

// FNV-1a over the bit patterns of every value and label.
std::string checksum(const data::DomainDataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& s : ds.samples) {
    mix(s.label);
    for (Eigen::Index i = 0; i < s.values.size(); ++i) mix(s.values.data()[i]);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json dataset_summary(const data::DomainDataset& ds) {
  const auto y = ds.labels();
  double lo = y.empty() ? 0.0 : *std::min_element(y.begin(), y.end());
  double hi = y.empty() ? 0.0 : *std::max_element(y.begin(), y.end());
  return {{"samples", ds.size()}, {"channels", ds.channels()}, {"label_min", lo}, {"label_max", hi},
          {"checksum", checksum(ds)}};
}

json step_summary(const data::DomainDataset& ds) {
  json steps = json::array();
  for (const auto& r : ds.log)
    if (r.step != "generate") steps.push_back({{"step", r.step}, {"removed", r.removed.size()}});
  return steps;
}

Tensor all_samples(const DomainFold& d) { return nn::concat(d.x_train, d.x_test); }

std::vector<double> all_labels(const DomainFold& d) {
  std::vector<double> y = d.y_train;
  y.insert(y.end(), d.y_test.begin(), d.y_test.end());
  return y;
}

}  // namespace

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::exception_ptr> errors(n);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::mutex m;
    std::size_t next = 0;
    bool failed = false;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(m);
            if (next >= n || failed) return;
            i = next++;
          }
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(m);
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void claim_run_dir(const RunDir& dir, const RunConfig& cfg) {
  const json snap = cfg.to_json();
  if (fs::exists(dir.snapshot())) {
    const json prev = read_json_file(dir.snapshot());
    if (prev != snap)
      fail(ErrorKind::config,
           dir.root.string() + " already holds a run with a different configuration; use a fresh --out directory",
           dir.snapshot().string());
    return;
  }
  write_json_file(dir.snapshot(), snap);
}

void write_metrics_section(const RunDir& dir, const std::string& section, const json& value) {
  json m = fs::exists(dir.metrics()) ? read_json_file(dir.metrics()) : json::object();
  m[section] = value;
  write_json_file(dir.metrics(), m);
}

json read_metrics_section(const RunDir& dir, const std::string& section) {
  const json m = read_json_file(dir.metrics());
  if (!m.contains(section))
    fail(ErrorKind::missing_artifact, dir.metrics().string() + " has no '" + section + "' section", dir.metrics().string());
  return m.at(section);
}

void cmd_gen_data(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o) {
  claim_run_dir(dir, cfg);
  Timer timer(dir, "gen-data");
  logger(o, "")("generating the synthetic source/target pair");
  const auto pair = data::generate_pair(cfg.generator);
  data::save_dataset(pair.source, dir.raw("source"));
  data::save_dataset(pair.target, dir.raw("target"));
  write_metrics_section(dir, "gen-data", {{"source", dataset_summary(pair.source)}, {"target", dataset_summary(pair.target)}});
}

void cmd_preprocess(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o) {
  claim_run_dir(dir, cfg);
  Timer timer(dir, "preprocess");
  json out = json::object();
  for (const char* domain : {"source", "target"}) {
    logger(o, "")(std::string("preprocessing the ") + domain + " domain");
    const auto raw = data::load_dataset(dir.raw(domain));
    const auto clean = data::preprocess(raw, cfg.preprocessing);
    data::save_dataset(clean, dir.clean(domain));
    json s = dataset_summary(clean);
    s["time_steps"] = clean.time();
    s["steps"] = step_summary(clean);
    s["channel_names"] = clean.channel_names;
    out[domain] = s;
  }
  write_metrics_section(dir, "preprocess", out);
}

void cmd_train(const RunDir& dir, const RunConfig& cfg, const std::string& method, const CommandOptions& o) {
  if (method != "dbacs" && method != "pca-coral" && method != "cca")
    fail(ErrorKind::usage, "train: unknown method '" + method + "' (expected dbacs, pca-coral or cca)");
  claim_run_dir(dir, cfg);
  Timer timer(dir, "train " + method);
  const CleanData data = load_clean(dir);
  std::vector<json> summaries(cfg.folds);
  parallel_for(cfg.folds, o.jobs, [&](std::size_t k) {
    const auto log = logger(o, "[fold " + std::to_string(k) + "] ");
    const FoldData f = make_fold(data, cfg, k);
    if (method == "dbacs") summaries[k] = train_dbacs_fold(dir, cfg, f, log);
    else summaries[k] = train_baseline_fold(dir, cfg, f, method == "cca" ? "cca" : "pca", log);
  });
  write_metrics_section(dir, "train " + method, {{"folds", summaries}});
}

void cmd_eval(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o) {
  claim_run_dir(dir, cfg);
  Timer timer(dir, "eval");
  const CleanData data = load_clean(dir);
  std::vector<FoldEvaluation> evs(cfg.folds);
  parallel_for(cfg.folds, o.jobs, [&](std::size_t k) {
    logger(o, "[fold " + std::to_string(k) + "] ")("evaluating");
    evs[k] = evaluate_fold(dir, cfg, make_fold(data, cfg, k));
  });

  json folds = json::array();
  std::vector<metrics::MaeTable> t1, t2, t3;
  for (const auto& e : evs) {
    folds.push_back(e.to_json());
    t1.push_back(e.table1);
    if (e.pca) t2.push_back(*e.pca);
    if (e.cca) t3.push_back(*e.cca);
  }
  json agg = {{"table1", metrics::average(t1).to_json()}};
  if (t2.size() == evs.size()) agg["table2_pca"] = metrics::average(t2).to_json();
  if (t3.size() == evs.size()) agg["table3_cca"] = metrics::average(t3).to_json();
  for (const char* split : {"train", "test"}) {
    json mean = json::object();
    for (const char* key : {"inner_source", "inner_target", "outer_before", "outer_after"}) {
      double s = 0.0;
      for (const auto& e : evs) s += (std::string(split) == "train" ? e.fid_train : e.fid_test).at(key).get<double>();
      mean[key] = s / static_cast<double>(evs.size());
    }
    agg["fid"][split] = mean;
  }
  json pearson = json::object();
  for (const auto& [name, block] : evs.front().pearson.items()) {
    double s = 0.0;
    for (const auto& e : evs) s += e.pearson.at(name).at("above_0_5").get<double>();
    pearson[name] = {{"mean_components_above_0_5", s / static_cast<double>(evs.size())}};
  }
  agg["pearson"] = pearson;
  write_metrics_section(dir, "eval", {{"folds", folds}, {"aggregate", agg}});
}

void cmd_match(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o) {
  claim_run_dir(dir, cfg);
  Timer timer(dir, "match");
  const std::size_t k = cfg.match.fold;
  const fs::path ck = dir.fold_checkpoints(k);
  const auto F = nn::load_network(ck / "F.json"), G = nn::load_network(ck / "G.json");
  const auto F0 = nn::load_network(ck / "F_init.json"), G0 = nn::load_network(ck / "G_init.json");
  logger(o, "")("matching on fold " + std::to_string(k));
  const FoldData f = make_fold(load_clean(dir), cfg, k);
  const Tensor xs = all_samples(f.source), xt = all_samples(f.target);
  matching::MatchReport r = matching::cross_domain_match(G, xs, all_labels(f.source), xt, all_labels(f.target),
                                                         f.source.train.channel_names, f.target.train.channel_names);
  r.cycle_source = matching::cycle_residuals(F, G, xs, matching::Direction::source);
  r.cycle_target = matching::cycle_residuals(F, G, xt, matching::Direction::target);
  r.write(dir.match(), cfg.match.plots);
  json j = r.to_json();
  j["fold"] = k;
  j["untrained_cycle_residuals"] = {
      {"source_median", matching::median(matching::cycle_residuals(F0, G0, xs, matching::Direction::source))},
      {"target_median", matching::median(matching::cycle_residuals(F0, G0, xt, matching::Direction::target))}};
  write_metrics_section(dir, "match", j);
}

void cmd_report(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o) {
  claim_run_dir(dir, cfg);
  Timer timer(dir, "report");
  const json ev = read_metrics_section(dir, "eval");
  const json& agg = ev.at("aggregate");
  std::vector<std::string> files;
  auto table = [&](const char* key, const char* file) {
    if (!agg.contains(key)) return;
    write_text_file(dir.tables() / file, metrics::MaeTable::from_json(agg.at(key)).to_csv());
    files.push_back("tables/" + std::string(file));
  };
  table("table1", "table1_dbacs.csv");
  table("table2_pca", "table2_pca.csv");
  table("table3_cca", "table3_cca.csv");

  std::ostringstream fid;
  fid << "split,inner_source,inner_target,outer_before,outer_after\n";
  for (const char* split : {"train", "test"}) {
    const json& b = agg.at("fid").at(split);
    fid << split << ',' << format_double(b.at("inner_source").get<double>()) << ','
        << format_double(b.at("inner_target").get<double>()) << ',' << format_double(b.at("outer_before").get<double>())
        << ',' << format_double(b.at("outer_after").get<double>()) << '\n';
  }
  write_text_file(dir.tables() / "fid.csv", fid.str());
  files.push_back("tables/fid.csv");

  // 2-D PCA of source test samples against the target mapped by the
  // untrained and the trained aligner (fold 0).
  logger(o, "")("rendering the alignment scatter");
  const FoldData f = make_fold(load_clean(dir), cfg, 0);
  const fs::path ck = dir.fold_checkpoints(0);
  const auto F = nn::load_network(ck / "F.json"), F0 = nn::load_network(ck / "F_init.json");
  const metrics::Embedding e = metrics::fit_embedding(f.source.x_test, 2);
  auto series = [&](const std::string& name, const std::string& color, const Tensor& x) {
    const linalg::Mat z = e.apply(x);
    svg::Series s{name, color, {}, {}};
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      s.x.push_back(z(i, 0));
      s.y.push_back(z.cols() > 1 ? z(i, 1) : 0.0);
    }
    return s;
  };
  const auto src = series("source", "#1f77b4", f.source.x_test);
  write_text_file(dir.plots() / "scatter_before.svg",
                  svg::scatter_plot("source vs target through the untrained aligner", {src, series("target (untrained F)", "#d62728", dbacs::apply_aligner(F0, f.target.x_test))}, "PC 1", "PC 2"));
  write_text_file(dir.plots() / "scatter_after.svg",
                  svg::scatter_plot("source vs aligned target", {src, series("target (trained F)", "#d62728", dbacs::apply_aligner(F, f.target.x_test))}, "PC 1", "PC 2"));
  files.push_back("plots/scatter_before.svg");
  files.push_back("plots/scatter_after.svg");
  write_metrics_section(dir, "report", {{"files", files}});
}

void cmd_pipeline(const RunDir& dir, const RunConfig& cfg, const CommandOptions& o) {
  cmd_gen_data(dir, cfg, o);
  cmd_preprocess(dir, cfg, o);
  for (const char* m : {"dbacs", "pca-coral", "cca"}) cmd_train(dir, cfg, m, o);
  cmd_eval(dir, cfg, o);
  cmd_match(dir, cfg, o);
  cmd_report(dir, cfg, o);
}

}  // namespace hda::pipeline
