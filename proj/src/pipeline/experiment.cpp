#include <algorithm>
#include <cmath>

#include "hda/error.hpp"
#include "hda/json_io.hpp"
#include "hda/nn/checkpoint.hpp"
#include "hda/pipeline.hpp"

namespace hda::pipeline {

using nlohmann::json;
using nn::Network;
using nn::Shape;
using nn::Tensor;
using metrics::MaeRow;
using metrics::MaeTable;

namespace {

DomainFold split_domain(const data::DomainDataset& ds, const data::Fold& fold) {
  DomainFold d;
  const data::DomainDataset train = data::subset(ds, fold.train);
  const data::Normalizer n = data::fit_normalizer(train);
  d.train = data::apply_normalizer(train, n);
  d.test = data::apply_normalizer(data::subset(ds, fold.test), n);
  d.x_train = data::to_tensor(d.train);
  d.x_test = data::to_tensor(d.test);
  d.y_train = d.train.labels();
  d.y_test = d.test.labels();
  return d;
}

double mae_of(const Network& P, const Tensor& x, const std::vector<double>& y) {
  return metrics::mae(dbacs::scalar_outputs(P, x), y);
}

Network load(const fs::path& p) { return nn::load_network(p); }

dbacs::PredictorSchedule seeded(dbacs::PredictorSchedule s, std::uint64_t seed) {
  s.seed = seed;
  return s;
}

json report_json(const dbacs::PredictorReport& r) {
  return {{"epochs_run", r.epochs_run},
          {"best_epoch", r.best_epoch},
          {"best_validation_mae", r.best_validation_mae},
          {"train_mae", r.train_mae}};
}

Tensor map_latent(const baselines::SubspaceModel& m, const Tensor& x, baselines::Side side) {
  return baselines::rows_as_time_steps(baselines::project(m, baselines::time_steps_as_rows(x), side), x.batch(),
                                       x.time());
}

// Target latents recoloured onto the source latent covariance.
Tensor coral_latent(const Tensor& zt, const linalg::Mat& A, const linalg::Vec& from, const linalg::Vec& to) {
  return baselines::rows_as_time_steps(baselines::coral_apply(baselines::time_steps_as_rows(zt), A, from, to),
                                       zt.batch(), zt.time());
}

struct LatentSet {
  Tensor s_tr, s_te, t_tr, t_te;  // target latents without CORAL
  Tensor c_tr, c_te;              // target latents after CORAL
};

LatentSet latents(const baselines::SubspaceModel& m, const FoldData& f) {
  using baselines::Side;
  LatentSet L;
  L.s_tr = map_latent(m, f.source.x_train, Side::source);
  L.s_te = map_latent(m, f.source.x_test, Side::source);
  L.t_tr = map_latent(m, f.target.x_train, Side::target);
  L.t_te = map_latent(m, f.target.x_test, Side::target);
  require(m.coral.has_value(), ErrorKind::data, "subspace model has no CORAL map");
  const linalg::Vec from = linalg::column_means(baselines::time_steps_as_rows(L.t_tr));
  const linalg::Vec to = linalg::column_means(baselines::time_steps_as_rows(L.s_tr));
  L.c_tr = coral_latent(L.t_tr, *m.coral, from, to);
  L.c_te = coral_latent(L.t_te, *m.coral, from, to);
  return L;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Label-nearest source partner for every target sample.
std::vector<std::size_t> partners(const std::vector<double>& yt, const std::vector<double>& ys) {
  return dbacs::nearest_label_pairs(yt, ys);
}

json pearson_block(const Tensor& a, const Tensor& b) {
  return metrics::pearson_per_component(baselines::time_steps_as_rows(a), baselines::time_steps_as_rows(b)).to_json();
}

}  // namespace

CleanData load_clean(const RunDir& dir) {
  return {data::load_dataset(dir.clean("source")), data::load_dataset(dir.clean("target"))};
}

FoldData make_fold(const CleanData& d, const RunConfig& cfg, std::size_t k) {
  require(k < cfg.folds, ErrorKind::config, "fold index out of range");
  const auto fs_ = data::kfold_split(d.source.size(), cfg.folds, derived_seed(cfg.seed, SeedUse::cv_source));
  const auto ft = data::kfold_split(d.target.size(), cfg.folds, derived_seed(cfg.seed, SeedUse::cv_target));
  FoldData f;
  f.index = k;
  f.source = split_domain(d.source, fs_[k]);
  f.target = split_domain(d.target, ft[k]);
  require(f.source.x_train.time() == f.target.x_train.time(), ErrorKind::data,
          "source and target series lengths differ after preprocessing");
  return f;
}

// --- DBACS ---------------------------------------------------------------------

json train_dbacs_fold(const RunDir& dir, const RunConfig& cfg, const FoldData& f, const Progress& log) {
  const std::size_t k = f.index;
  const fs::path ck = dir.fold_checkpoints(k);
  const Shape ss = f.source.x_train.shape(), ts = f.target.x_train.shape();
  const std::uint64_t mseed = derived_seed(cfg.seed, SeedUse::model, k);
  dbacs::DbacsModel m = dbacs::make_model(ss, ts, cfg.preset, mseed);
  Network PT(ts, dbacs::predictor_layers(ts, cfg.preset));
  PT.initialize(mseed + 5);

  const std::uint64_t pseed = derived_seed(cfg.seed, SeedUse::predictor, k);
  log("training the dedicated source predictor");
  const auto rs = dbacs::train_predictor(m.P, f.source.x_train, f.source.y_train, seeded(cfg.predictor, pseed));
  log("training the dedicated target predictor");
  const auto rt = dbacs::train_predictor(PT, f.target.x_train, f.target.y_train, seeded(cfg.predictor, pseed + 1));
  nn::save_network(ck / "P_source.json", m.P, {pseed, rs.epochs_run});
  nn::save_network(ck / "P_target.json", PT, {pseed + 1, rt.epochs_run});
  nn::save_network(ck / "F_init.json", m.F, {mseed + 1, 0});
  nn::save_network(ck / "G_init.json", m.G, {mseed + 2, 0});
  const std::uint64_t p_hash = m.P.param_hash();

  dbacs::TrainSchedule sched = cfg.schedule;
  sched.seed = derived_seed(cfg.seed, SeedUse::schedule, k);
  log("SSIM pretraining of both aligners");
  const auto pre = dbacs::pretrain_aligners(m, f.source.x_train, f.source.y_train, f.target.x_train,
                                            f.target.y_train, sched.pretrain_epochs, sched.batch_size, sched.seed);
  nn::save_network(ck / "F_pretrained.json", m.F, {mseed + 1, sched.pretrain_epochs});
  nn::save_network(ck / "G_pretrained.json", m.G, {mseed + 2, sched.pretrain_epochs});

  log("adversarial training");
  dbacs::LossHistory hist;
  const dbacs::LabelAccess target_labels(f.target.y_train);
  const dbacs::LabelAccess* labels = cfg.weights.pred > 0.0 ? &target_labels : nullptr;
  dbacs::TrainReport tr;
  try {
    tr = dbacs::train_dbacs(m, f.source.x_train, f.target.x_train, labels, sched, cfg.weights, hist);
  } catch (const Error& e) {
    hist.write_csv(dir.fold_logs(k) / "losses.csv");
    throw;
  }
  hist.write_csv(dir.fold_logs(k) / "losses.csv");
  const std::uint64_t steps = hist.records().empty() ? 0 : hist.records().back().step + 1;
  for (auto [name, net] : {std::pair<const char*, const Network*>{"P", &m.P}, {"F", &m.F}, {"G", &m.G},
                           {"DA", &m.DA}, {"DB", &m.DB}})
    nn::save_network(ck / (std::string(name) + ".json"), *net, {mseed, steps});

  json epochs = json::object();
  for (const auto& name : dbacs::loss_registry()) {
    if (hist.series(name).empty()) continue;
    std::vector<double> per_epoch;
    const std::size_t logged = tr.epochs_completed + (tr.guard_tripped ? 1 : 0);
    for (std::uint64_t e = 0; e < logged; ++e) per_epoch.push_back(hist.epoch_mean(name, e));
    epochs[name] = per_epoch;
  }
  if (tr.guard_tripped)
    log("critic penalty " + format_double(tr.guard_penalty) + " in epoch " + std::to_string(tr.guard_epoch) +
        ": kept the first " + std::to_string(tr.epochs_completed) + " epochs and stopped");
  json summary = {{"fold", k},
                  {"epochs_completed", tr.epochs_completed},
                  {"gp_guard",
                   {{"tripped", tr.guard_tripped},
                    {"epoch", tr.guard_tripped ? json(tr.guard_epoch) : json(nullptr)},
                    {"penalty", tr.guard_tripped ? json(tr.guard_penalty) : json(nullptr)}}},
                  {"source_train_count", f.source.x_train.batch()},
                  {"target_train_count", f.target.x_train.batch()},
                  {"predictor_source", report_json(rs)},
                  {"predictor_target", report_json(rt)},
                  {"pretrain",
                   {{"ssim_f_before", pre.ssim_f_before},
                    {"ssim_f_after", pre.ssim_f_after},
                    {"ssim_g_before", pre.ssim_g_before},
                    {"ssim_g_after", pre.ssim_g_after}}},
                  {"steps", steps},
                  {"epoch_means", epochs},
                  {"target_label_reads", target_labels.reads()},
                  {"p_frozen", m.P.param_hash() == p_hash}};
  write_json_file(ck / "dbacs_summary.json", summary);
  return summary;
}

// --- linear baselines ---------------------------------------------------------------

json train_baseline_fold(const RunDir& dir, const RunConfig& cfg, const FoldData& f, const std::string& kind,
                         const Progress& log) {
  require(kind == "pca" || kind == "cca", ErrorKind::usage, "unknown baseline '" + kind + "'");
  const std::size_t k = f.index;
  const fs::path ck = dir.fold_checkpoints(k) / kind;
  const linalg::Mat rs = baselines::time_steps_as_rows(f.source.x_train);
  const linalg::Mat rt = baselines::time_steps_as_rows(f.target.x_train);
  const std::size_t dmin = std::min(f.source.x_train.channels(), f.target.x_train.channels());
  json summary = {{"fold", k}, {"kind", kind}};

  baselines::SubspaceModel m;
  if (kind == "pca") {
    const linalg::Vec vs = baselines::explained_variance_ratios(rs), vt = baselines::explained_variance_ratios(rt);
    const double thr = cfg.baselines.variance_threshold;
    // A common k so both domains land in spaces of equal width.
    const std::size_t kk = std::min(dmin, std::max(baselines::select_k_by_variance({vs.data(), static_cast<std::size_t>(vs.size())}, thr),
                                                   baselines::select_k_by_variance({vt.data(), static_cast<std::size_t>(vt.size())}, thr)));
    m = baselines::pca_pair(rs, rt, kk);
    summary["components"] = kk;
    summary["coverage"] = {{"source", m.ratios.sum()}, {"target", m.target_ratios.sum()}};
  } else {
    const auto pairs = dbacs::nearest_label_pairs(f.source.y_train, f.target.y_train);
    const auto [ps, pt] = baselines::paired_time_step_rows(f.source.x_train, f.target.x_train, pairs);
    std::size_t kk = cfg.baselines.cca_components;
    if (kk == 0) kk = baselines::select_cca_k(ps, pt, cfg.baselines.cca_grid_step,
                                              derived_seed(cfg.seed, SeedUse::cca_grid, k));
    require(kk <= dmin, ErrorKind::config,
            "baselines.cca_components = " + std::to_string(kk) + " exceeds the smaller channel count " +
                std::to_string(dmin));
    m = baselines::cca_fit(ps, pt, kk);
    summary["components"] = kk;
    summary["correlations"] = std::vector<double>(m.ratios.data(), m.ratios.data() + m.ratios.size());
  }
  const linalg::Mat zs = baselines::project(m, rs, baselines::Side::source);
  const linalg::Mat zt = baselines::project(m, rt, baselines::Side::target);
  m.coral = baselines::coral_align(zt, zs).A;
  write_json_file(ck / "subspace.json", m.to_json());

  const LatentSet L = latents(m, f);
  const Shape ls = L.s_tr.shape();
  const std::uint64_t seed = derived_seed(cfg.seed, SeedUse::baseline_predictor, k) + (kind == "cca" ? 100 : 0);
  struct Job {
    const char* name;
    Tensor x;
    std::vector<double> y;
  };
  auto cat = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
  };
  const std::vector<Job> jobs = {
      {"source", L.s_tr, f.source.y_train},
      {"target", L.t_tr, f.target.y_train},
      {"both", nn::concat(L.s_tr, L.t_tr), cat(f.source.y_train, f.target.y_train)},
      {"coral_both", nn::concat(L.s_tr, L.c_tr), cat(f.source.y_train, f.target.y_train)},
  };
  json preds = json::object();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    log("training the " + upper(kind) + " latent predictor (" + jobs[i].name + ")");
    Network P(ls, dbacs::predictor_layers(ls, cfg.preset));
    P.initialize(seed + 10 * i);
    const auto r = dbacs::train_predictor(P, jobs[i].x, jobs[i].y, seeded(cfg.baselines.predictor, seed + 10 * i + 1));
    nn::save_network(ck / ("predictor_" + std::string(jobs[i].name) + ".json"), P, {seed + 10 * i, r.epochs_run});
    preds[jobs[i].name] = report_json(r);
  }
  summary["predictors"] = preds;
  write_json_file(ck / "summary.json", summary);
  return summary;
}

// --- evaluation -----------------------------------------------------------------------

json FoldEvaluation::to_json() const {
  json j = {{"table1", table1.to_json()},
            {"fid", {{"train", fid_train}, {"test", fid_test}}},
            {"pearson", pearson},
            {"p_hash", {{"dedicated", p_hash_dedicated}, {"dbacs", p_hash_dbacs}}}};
  if (pca) j["table2_pca"] = pca->to_json();
  if (cca) j["table3_cca"] = cca->to_json();
  return j;
}

namespace {

MaeTable baseline_table(const fs::path& ck, const std::string& kind, const FoldData& f, json& pearson) {
  const auto m = baselines::SubspaceModel::from_json(read_json_file(ck / "subspace.json"));
  const LatentSet L = latents(m, f);
  auto P = [&](const char* name) { return load(ck / ("predictor_" + std::string(name) + ".json")); };
  const Network ps = P("source"), pt = P("target"), pb = P("both"), pc = P("coral_both");
  auto row = [&](const Network& net, bool coral) {
    return MaeRow{mae_of(net, L.s_tr, f.source.y_train), mae_of(net, L.s_te, f.source.y_test),
                  mae_of(net, coral ? L.c_tr : L.t_tr, f.target.y_train),
                  mae_of(net, coral ? L.c_te : L.t_te, f.target.y_test)};
  };
  const std::string K = upper(kind);
  MaeTable t;
  t.rows = {{K + "(source)", row(ps, false)},
            {K + "(target)", row(pt, false)},
            {K + "(both)", row(pb, false)},
            {K + "+CORAL(source)", row(ps, true)},
            {K + "+CORAL(both)", row(pc, true)}};
  // Components of label-paired test samples.
  const auto pair = partners(f.target.y_test, f.source.y_test);
  pearson[kind] = pearson_block(nn::gather(L.s_te, pair), L.t_te);
  return t;
}

}  // namespace

FoldEvaluation evaluate_fold(const RunDir& dir, const RunConfig& cfg, const FoldData& f) {
  const fs::path ck = dir.fold_checkpoints(f.index);
  const Network PS = load(ck / "P_source.json"), PT = load(ck / "P_target.json");
  const Network P = load(ck / "P.json"), F = load(ck / "F.json"), F0 = load(ck / "F_init.json");

  FoldEvaluation ev;
  ev.p_hash_dedicated = std::to_string(PS.param_hash());
  ev.p_hash_dbacs = std::to_string(P.param_hash());
  const Tensor ft_tr = dbacs::apply_aligner(F, f.target.x_train), ft_te = dbacs::apply_aligner(F, f.target.x_test);
  ev.table1.rows = {
      {"lower-bound",
       {mae_of(PS, f.source.x_train, f.source.y_train), mae_of(PS, f.source.x_test, f.source.y_test),
        mae_of(PT, f.target.x_train, f.target.y_train), mae_of(PT, f.target.x_test, f.target.y_test)}},
      {"dbacs",
       {mae_of(P, f.source.x_train, f.source.y_train), mae_of(P, f.source.x_test, f.source.y_test),
        mae_of(P, ft_tr, f.target.y_train), mae_of(P, ft_te, f.target.y_test)}}};

  const std::uint64_t fseed = derived_seed(cfg.seed, SeedUse::fid, f.index);
  ev.fid_train = metrics::domain_distances(f.source.x_train, f.target.x_train,
                                           dbacs::apply_aligner(F0, f.target.x_train), ft_tr, fseed)
                     .to_json();
  ev.fid_test = metrics::domain_distances(f.source.x_test, f.target.x_test, dbacs::apply_aligner(F0, f.target.x_test),
                                          ft_te, fseed + 1)
                    .to_json();

  // Source-embedding coordinates of aligned target samples vs their
  // label-nearest source samples.
  const metrics::Embedding e = metrics::fit_embedding(f.source.x_train);
  const auto pair = partners(f.target.y_test, f.source.y_test);
  ev.pearson = json::object();
  ev.pearson["dbacs"] = metrics::pearson_per_component(e.apply(nn::gather(f.source.x_test, pair)), e.apply(ft_te)).to_json();

  if (fs::exists(ck / "pca" / "subspace.json")) ev.pca = baseline_table(ck / "pca", "pca", f, ev.pearson);
  if (fs::exists(ck / "cca" / "subspace.json")) ev.cca = baseline_table(ck / "cca", "cca", f, ev.pearson);
  return ev;
}

}  // namespace hda::pipeline
