#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hda/dbacs.hpp"
#include "hda/error.hpp"

namespace hda::dbacs {

using namespace nn;

namespace {

double mae_on(const Network& P, const Tensor& x, std::span<const double> y, std::span<const std::size_t> idx) {
  const Tensor out = P.forward(gather(x, idx));
  double s = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) s += std::abs(out.values()[i] - y[idx[i]]);
  return s / static_cast<double>(idx.size());
}

}  // namespace

PredictorReport train_predictor(Network& P, const Tensor& x, std::span<const double> y, const PredictorSchedule& s,
                                const AdamConfig& adam) {
  require(P.output_shape() == Shape{1, 1}, ErrorKind::shape, "predictor must emit one scalar per sample");
  require(y.size() == x.batch(), ErrorKind::shape, "predictor training: one label per sample");
  require(x.batch() >= 2, ErrorKind::data, "predictor training needs at least two samples");
  std::mt19937_64 rng(s.seed);
  std::vector<std::size_t> perm(x.batch());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(s.validation_fraction * static_cast<double>(x.batch()))));
  std::vector<std::size_t> val(perm.end() - static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::vector<std::size_t> train(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_val));
  std::sort(val.begin(), val.end());

  AdamState opt(P.param_count(), adam);
  PredictorReport r;
  std::vector<double> best(P.params().begin(), P.params().end());
  r.best_validation_mae = mae_on(P, x, y, val);
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= s.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t b = 0; b < train.size(); b += s.batch_size) {
      const std::span<const std::size_t> idx(train.data() + b, std::min(s.batch_size, train.size() - b));
      Tape tape;
      const Tensor out = P.forward(gather(x, idx), tape);
      std::vector<double> truth(idx.size()), g;
      for (std::size_t i = 0; i < idx.size(); ++i) truth[i] = y[idx[i]];
      const double loss = mae_loss(out.values(), truth, &g);
      if (!std::isfinite(loss)) fail(ErrorKind::diverged, "predictor training diverged");
      Tensor up(out.batch(), out.shape());
      std::copy(g.begin(), g.end(), up.values().begin());
      adam_step(opt, P.params(), P.gradient(tape, up));
    }
    r.epochs_run = epoch;
    const double v = mae_on(P, x, y, val);
    if (v < r.best_validation_mae) {
      r.best_validation_mae = v;
      r.best_epoch = epoch;
      best.assign(P.params().begin(), P.params().end());
      since_best = 0;
    } else if (++since_best >= s.patience) {
      break;
    }
  }
  P.set_params(best);
  std::vector<std::size_t> all(x.batch());
  std::iota(all.begin(), all.end(), 0);
  r.train_mae = mae_on(P, x, y, all);
  return r;
}

}  // namespace hda::dbacs
