#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hda/dbacs.hpp"
#include "hda/error.hpp"
#include "hda/json_io.hpp"

namespace hda::dbacs {

using namespace nn;

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorKind::diverged, std::string("training diverged: ") + what + " is not finite");
}

void check_scalar_net(const Network& net, const char* what) {
  if (net.output_shape() != Shape{1, 1}) fail(ErrorKind::shape, std::string(what) + " must emit one scalar per sample");
}

// Mean absolute difference and its gradient w.r.t. `a`, scaled.
double l1_mean(const Tensor& a, const Tensor& b, Tensor* grad, double scale) {
  if (a.shape() != b.shape() || a.batch() != b.batch()) {
    fail(ErrorKind::shape, "cycle: reconstruction " + to_string(a.shape()) + " vs input " + to_string(b.shape()));
  }
  const auto n = static_cast<double>(a.size());
  double s = 0.0;
  if (grad) *grad = Tensor(a.batch(), a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += std::abs(d);
    if (grad) grad->values()[i] = scale * sign(d) / n;
  }
  return s / n;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Critic output gradient for a weighted batch mean, propagated to the critic
// parameters (accumulated into `grad`) and optionally to its input.
std::vector<double> critic_mean(const Network& critic, const Tensor& x, double weight, std::span<double> grad,
                                Tensor* input_grad) {
  Tape tape;
  const Tensor y = critic.forward(x, tape);
  std::vector<double> out(y.values());
  Tensor up(y.batch(), y.shape(), weight / static_cast<double>(x.batch()));
  if (grad.empty()) {
    std::vector<double> scratch(critic.param_count(), 0.0);
    critic.backward(tape, up, scratch, input_grad);
  } else {
    critic.backward(tape, up, grad, input_grad);
  }
  return out;
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.values()[i] += src.values()[i];
}

}  // namespace

const std::vector<std::string>& loss_registry() {
  static const std::vector<std::string> names = {"adv_S", "adv_T", "cyc_S", "cyc_T", "pred", "gp_A", "gp_B"};
  return names;
}

double mae_loss(std::span<const double> pred, std::span<const double> truth, std::vector<double>* grad) {
  require(pred.size() == truth.size(), ErrorKind::shape, "mae: length mismatch");
  require(!pred.empty(), ErrorKind::data, "mae: empty batch");
  const auto n = static_cast<double>(pred.size());
  double s = 0.0;
  if (grad) grad->assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += std::abs(d);
    if (grad) (*grad)[i] = sign(d) / n;
  }
  return s / n;
}

std::vector<double> scalar_outputs(const Network& net, const Tensor& x) {
  check_scalar_net(net, "network");
  return net.forward(x).values();
}

CycleLosses cycle_loss(const Network& F, const Network& G, const Tensor& xs, const Tensor& xt) {
  CycleLosses c;
  c.source = l1_mean(F.forward(G.forward(xs)), xs, nullptr, 1.0);
  c.target = l1_mean(G.forward(F.forward(xt)), xt, nullptr, 1.0);
  return c;
}

AdversarialLosses adversarial_losses(const DbacsModel& m, const Tensor& xs, const Tensor& xt) {
  require(xs.batch() > 0 && xt.batch() > 0, ErrorKind::data, "adversarial losses need non-empty batches");
  AdversarialLosses a;
  a.source = mean(scalar_outputs(m.DA, xs)) - mean(scalar_outputs(m.DA, m.F.forward(xt)));
  a.target = mean(scalar_outputs(m.DB, xt)) - mean(scalar_outputs(m.DB, m.G.forward(xs)));
  return a;
}

double gradient_penalty(const Network& critic, const Tensor& real, const Tensor& fake, std::uint64_t seed,
                        std::span<double> param_grad, double scale) {
  check_scalar_net(critic, "critic");
  if (real.shape() != fake.shape() || real.batch() != fake.batch()) {
    fail(ErrorKind::shape, "gradient penalty: real and fake batches differ in shape");
  }
  const std::size_t B = real.batch();
  require(B > 0, ErrorKind::data, "gradient penalty: empty batch");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Tensor xhat(B, real.shape());
  const std::size_t n = real.shape().size();
  for (std::size_t b = 0; b < B; ++b) {
    const double e = unif(rng);
    for (std::size_t i = 0; i < n; ++i) {
      xhat.values()[b * n + i] = e * real.values()[b * n + i] + (1.0 - e) * fake.values()[b * n + i];
    }
  }
  Tape tape;
  critic.forward(xhat, tape);
  std::vector<double> scratch(critic.param_count(), 0.0);
  Tensor g;
  critic.backward(tape, Tensor(B, Shape{1, 1}, 1.0), scratch, &g);

  double penalty = 0.0;
  Tensor v(B, real.shape());
  for (std::size_t b = 0; b < B; ++b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += g.values()[b * n + i] * g.values()[b * n + i];
    const double norm = std::sqrt(sq);
    penalty += (norm - 1.0) * (norm - 1.0);
    // d/dtheta (|g|-1)^2 = 2 (|g|-1)/|g| * g . dg/dtheta, and g . dg/dtheta is
    // the parameter gradient of the directional derivative along g.
    const double c = norm > 0.0 ? 2.0 * (norm - 1.0) / (norm * static_cast<double>(B)) : 0.0;
    for (std::size_t i = 0; i < n; ++i) v.values()[b * n + i] = c * g.values()[b * n + i];
  }
  penalty /= static_cast<double>(B);

  if (!param_grad.empty()) {
    if (param_grad.size() != critic.param_count()) fail(ErrorKind::shape, "gradient penalty: gradient buffer length");
    TangentTape tt;
    critic.forward_tangent(xhat, v, tt);
    critic.backward_tangent(tt, Tensor(B, Shape{1, 1}, 0.0), Tensor(B, Shape{1, 1}, scale), param_grad);
  }
  return penalty;
}

Optimizers make_optimizers(const DbacsModel& m, const AdamConfig& cfg) {
  return {AdamState(m.F.param_count(), cfg), AdamState(m.G.param_count(), cfg), AdamState(m.DA.param_count(), cfg),
          AdamState(m.DB.param_count(), cfg)};
}

CriticGradients critic_gradients(const DbacsModel& m, const Tensor& xs, const Tensor& xt, const LossWeights& w,
                                 std::uint64_t seed) {
  const Tensor fake_s = m.F.forward(xt);
  const Tensor fake_t = m.G.forward(xs);
  require(fake_s.batch() == xs.batch() && fake_t.batch() == xt.batch(), ErrorKind::shape,
          "critic step: source and target batches must have equal size");
  CriticGradients g;
  g.DA.assign(m.DA.param_count(), 0.0);
  g.DB.assign(m.DB.param_count(), 0.0);
  CriticStep& r = g.loss;
  r.adv_source = mean(critic_mean(m.DA, xs, 1.0, g.DA, nullptr)) - mean(critic_mean(m.DA, fake_s, -1.0, g.DA, nullptr));
  r.adv_target = mean(critic_mean(m.DB, xt, 1.0, g.DB, nullptr)) - mean(critic_mean(m.DB, fake_t, -1.0, g.DB, nullptr));
  r.gp_a = gradient_penalty(m.DA, xs, fake_s, seed, g.DA, -w.gp);
  r.gp_b = gradient_penalty(m.DB, xt, fake_t, seed ^ 0x9e3779b97f4a7c15ULL, g.DB, -w.gp);
  r.total = r.adv_source + r.adv_target - w.gp * (r.gp_a + r.gp_b);
  return g;
}

CriticStep critic_step(DbacsModel& m, const Tensor& xs, const Tensor& xt, Optimizers& opt, const LossWeights& w,
                       std::uint64_t seed) {
  const CriticGradients g = critic_gradients(m, xs, xt, w, seed);
  check_finite(g.loss.total, "critic loss");
  adam_step(opt.DA, m.DA.params(), g.DA, true);
  adam_step(opt.DB, m.DB.params(), g.DB, true);
  return g.loss;
}

AlignerGradients aligner_gradients(const DbacsModel& m, const Tensor& xs, const Tensor& xt,
                                   const LabeledBatch* labeled, const LossWeights& w) {
  if (w.pred > 0.0 && (labeled == nullptr || labeled->y.empty())) {
    fail(ErrorKind::config, "aligner step: prediction weight > 0 requires a labeled target batch");
  }
  AlignerGradients out;
  std::vector<double>& gf = out.F;
  std::vector<double>& gg = out.G;
  gf.assign(m.F.param_count(), 0.0);
  gg.assign(m.G.param_count(), 0.0);
  Tape tf, tg, tfg, tgf;
  const Tensor ys = m.F.forward(xt, tf);   // target mapped to source
  const Tensor yt = m.G.forward(xs, tg);   // source mapped to target
  const Tensor cs = m.F.forward(yt, tfg);  // source cycled
  const Tensor ct = m.G.forward(ys, tgf);  // target cycled

  AlignerStep& r = out.loss;
  Tensor d_ys, d_yt;
  r.adv_source = -mean(critic_mean(m.DA, ys, -w.adv_source, {}, &d_ys));
  r.adv_target = -mean(critic_mean(m.DB, yt, -w.adv_target, {}, &d_yt));

  Tensor g_cs, g_ct, g_from_cs, g_from_ct;
  r.cycle_source = l1_mean(cs, xs, &g_cs, w.cycle);
  r.cycle_target = l1_mean(ct, xt, &g_ct, w.cycle);
  m.F.backward(tfg, g_cs, gf, &g_from_cs);  // into G's output
  m.G.backward(tgf, g_ct, gg, &g_from_ct);  // into F's output
  add_into(d_ys, g_from_ct);
  add_into(d_yt, g_from_cs);

  if (w.pred > 0.0) {
    Tape tl, tp;
    const Tensor mapped = m.F.forward(labeled->x, tl);
    const Tensor p = m.P.forward(mapped, tp);
    std::vector<double> gp;
    r.pred = mae_loss(p.values(), labeled->y, &gp);
    Tensor up(p.batch(), p.shape());
    for (std::size_t i = 0; i < gp.size(); ++i) up.values()[i] = w.pred * gp[i];
    std::vector<double> scratch(m.P.param_count(), 0.0);
    Tensor g_mapped;
    m.P.backward(tp, up, scratch, &g_mapped);
    m.F.backward(tl, g_mapped, gf);
  }

  m.F.backward(tf, d_ys, gf);
  m.G.backward(tg, d_yt, gg);
  r.total = w.adv_source * r.adv_source + w.adv_target * r.adv_target +
            w.cycle * (r.cycle_source + r.cycle_target) + w.pred * r.pred;
  return out;
}

AlignerStep aligner_step(DbacsModel& m, const Tensor& xs, const Tensor& xt, const LabeledBatch* labeled,
                         Optimizers& opt, const LossWeights& w) {
  const AlignerGradients g = aligner_gradients(m, xs, xt, labeled, w);
  check_finite(g.loss.total, "aligner loss");
  adam_step(opt.F, m.F.params(), g.F);
  adam_step(opt.G, m.G.params(), g.G);
  return g.loss;
}

void LossHistory::add(std::uint64_t step, std::uint64_t epoch, const std::string& name, double value) {
  const auto& reg = loss_registry();
  if (std::find(reg.begin(), reg.end(), name) == reg.end()) {
    fail(ErrorKind::contract, "loss '" + name + "' is not in the loss registry");
  }
  records_.push_back({step, epoch, name, value});
}

std::vector<double> LossHistory::series(const std::string& name) const {
  std::vector<double> out;
  for (const auto& r : records_)
    if (r.name == name) out.push_back(r.value);
  return out;
}

double LossHistory::epoch_mean(const std::string& name, std::uint64_t epoch, bool absolute) const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& r : records_) {
    if (r.name == name && r.epoch == epoch) {
      s += absolute ? std::abs(r.value) : r.value;
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::contract, "no '" + name + "' records for epoch " + std::to_string(epoch));
  return s / static_cast<double>(n);
}

std::string LossHistory::to_csv() const {
  std::string out = "step,epoch,loss_name,value\n";
  for (const auto& r : records_) {
    out += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + r.name + "," + format_double(r.value) + "\n";
  }
  return out;
}

void LossHistory::write_csv(const std::filesystem::path& path) const { write_text_file(path, to_csv()); }

namespace {

// Draws `count` distinct indices below n (all of them, shuffled, when count >= n).
std::vector<std::size_t> draw_batch(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t k = std::min(n, count);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

TrainReport train_dbacs(DbacsModel& m, const Tensor& xs, const Tensor& xt, const LabelAccess* target_labels,
                        const TrainSchedule& schedule, const LossWeights& w, LossHistory& history,
                        const AdamConfig& adam) {
  TrainReport report;
  if (schedule.epochs == 0) return report;
  require(xs.batch() > 0 && xt.batch() > 0, ErrorKind::data, "train_dbacs: empty domain");
  require(xs.shape() == m.source && xt.shape() == m.target, ErrorKind::shape,
          "train_dbacs: data shapes do not match the model");
  if (w.pred > 0.0) {
    require(target_labels != nullptr && target_labels->size() == xt.batch(), ErrorKind::config,
            "train_dbacs: prediction weight > 0 needs one label per target sample");
  }
  Optimizers opt = make_optimizers(m, adam);
  std::mt19937_64 rng(schedule.seed);
  const std::size_t B = std::min({schedule.batch_size, xs.batch(), xt.batch()});
  const std::size_t iters = (xt.batch() + schedule.batch_size - 1) / schedule.batch_size;
  std::uint64_t step = 0;
  std::vector<double> keep_f, keep_g, keep_da, keep_db;
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    if (schedule.gp_guard > 0.0) {
      keep_f.assign(m.F.params().begin(), m.F.params().end());
      keep_g.assign(m.G.params().begin(), m.G.params().end());
      keep_da.assign(m.DA.params().begin(), m.DA.params().end());
      keep_db.assign(m.DB.params().begin(), m.DB.params().end());
    }
    double gp_sum_a = 0.0, gp_sum_b = 0.0;
    for (std::size_t it = 0; it < iters; ++it, ++step) {
      CriticStep c;
      for (std::size_t k = 0; k < schedule.critic_steps; ++k) {
        const auto is = draw_batch(xs.batch(), B, rng);
        const auto itg = draw_batch(xt.batch(), B, rng);
        c = critic_step(m, gather(xs, is), gather(xt, itg), opt, w, rng());
      }
      const auto is = draw_batch(xs.batch(), B, rng);
      const auto itg = draw_batch(xt.batch(), B, rng);
      LabeledBatch lb;
      if (w.pred > 0.0) {
        lb.x = gather(xt, itg);
        for (std::size_t i : itg) lb.y.push_back((*target_labels)[i]);
      }
      const AlignerStep a = aligner_step(m, gather(xs, is), gather(xt, itg), w.pred > 0.0 ? &lb : nullptr, opt, w);
      history.add(step, epoch, "adv_S", c.adv_source);
      history.add(step, epoch, "adv_T", c.adv_target);
      history.add(step, epoch, "gp_A", c.gp_a);
      history.add(step, epoch, "gp_B", c.gp_b);
      gp_sum_a += c.gp_a;
      gp_sum_b += c.gp_b;
      history.add(step, epoch, "cyc_S", a.cycle_source);
      history.add(step, epoch, "cyc_T", a.cycle_target);
      if (w.pred > 0.0) history.add(step, epoch, "pred", a.pred);
    }
    const double gp = std::max(gp_sum_a, gp_sum_b) / static_cast<double>(iters);
    if (schedule.gp_guard > 0.0 && gp > schedule.gp_guard) {
      std::copy(keep_f.begin(), keep_f.end(), m.F.params().begin());
      std::copy(keep_g.begin(), keep_g.end(), m.G.params().begin());
      std::copy(keep_da.begin(), keep_da.end(), m.DA.params().begin());
      std::copy(keep_db.begin(), keep_db.end(), m.DB.params().begin());
      report.guard_tripped = true;
      report.guard_epoch = epoch;
      report.guard_penalty = gp;
      return report;
    }
    report.epochs_completed = epoch + 1;
  }
  return report;
}

Tensor apply_aligner(const Network& net, const Tensor& x) {
  if (x.channels() != net.input_shape().channels) {
    fail(ErrorKind::shape, "aligner expects " + std::to_string(net.input_shape().channels) + " channels, got " +
                               std::to_string(x.channels()));
  }
  if (x.batch() == 0) return Tensor(0, net.output_shape());
  return net.forward(x);
}

}  // namespace hda::dbacs
