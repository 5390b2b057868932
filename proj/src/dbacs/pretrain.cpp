#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <variant>

#include "hda/dbacs.hpp"
#include "hda/error.hpp"

namespace hda::dbacs {

using namespace nn;

std::vector<double> channel_ranges(const Tensor& x) {
  std::vector<double> lo(x.channels(), std::numeric_limits<double>::infinity());
  std::vector<double> hi(x.channels(), -std::numeric_limits<double>::infinity());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t t = 0; t < x.time(); ++t)
      for (std::size_t c = 0; c < x.channels(); ++c) {
        lo[c] = std::min(lo[c], x(b, t, c));
        hi[c] = std::max(hi[c], x(b, t, c));
      }
  std::vector<double> r(x.channels());
  for (std::size_t c = 0; c < r.size(); ++c) r[c] = std::max(hi[c] - lo[c], 1e-12);
  return r;
}

double ssim(const Tensor& x, const Tensor& y, std::span<const double> ranges, Tensor* grad_x) {
  if (x.shape() != y.shape() || x.batch() != y.batch()) {
    fail(ErrorKind::shape, "ssim: " + to_string(x.shape()) + " vs " + to_string(y.shape()));
  }
  require(ranges.size() == x.channels(), ErrorKind::shape, "ssim: one range per channel required");
  require(x.batch() > 0, ErrorKind::data, "ssim: empty batch");
  const std::size_t T = x.time(), C = x.channels(), B = x.batch();
  const std::size_t win = std::min(kSsimWindow, T);
  const std::size_t nwin = T - win + 1;
  const auto N = static_cast<double>(win);
  const double count = static_cast<double>(B * C * nwin);
  if (grad_x) *grad_x = Tensor(B, x.shape());
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double c1 = (0.01 * ranges[c]) * (0.01 * ranges[c]);
      const double c2 = (0.03 * ranges[c]) * (0.03 * ranges[c]);
      for (std::size_t w0 = 0; w0 < nwin; ++w0) {
        double mx = 0, my = 0;
        for (std::size_t t = w0; t < w0 + win; ++t) {
          mx += x(b, t, c);
          my += y(b, t, c);
        }
        mx /= N;
        my /= N;
        double vx = 0, vy = 0, cxy = 0;
        for (std::size_t t = w0; t < w0 + win; ++t) {
          const double dx = x(b, t, c) - mx, dy = y(b, t, c) - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
        vx /= N;
        vy /= N;
        cxy /= N;
        const double a1 = 2 * mx * my + c1, a2 = 2 * cxy + c2;
        const double b1 = mx * mx + my * my + c1, b2 = vx + vy + c2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (grad_x) {
          // dS/dx_i = 2/N [ my a2/(b1 b2) + a1 (y_i - my)/(b1 b2) - S (mx/b1 + (x_i - mx)/b2) ]
          const double inv = 1.0 / (b1 * b2);
          for (std::size_t t = w0; t < w0 + win; ++t) {
            const double g = (2.0 / N) * (my * a2 * inv + a1 * (y(b, t, c) - my) * inv -
                                          s * (mx / b1 + (x(b, t, c) - mx) / b2));
            (*grad_x)(b, t, c) += g / count;
          }
        }
      }
    }
  }
  return total / count;
}

std::vector<std::size_t> nearest_label_pairs(std::span<const double> from, std::span<const double> to) {
  require(!from.empty() && !to.empty(), ErrorKind::data, "label pairing needs two non-empty label sets");
  std::vector<std::size_t> out;
  out.reserve(from.size());
  for (double v : from) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < to.size(); ++j)
      if (std::abs(to[j] - v) < std::abs(to[best] - v)) best = j;
    out.push_back(best);
  }
  return out;
}

namespace {

// One epoch of 1 - SSIM descent for `net` mapping inputs[idx] onto targets.
void ssim_epoch(Network& net, AdamState& opt, const Tensor& inputs, const Tensor& targets,
                std::span<const double> ranges, std::size_t batch, std::mt19937_64& rng) {
  std::vector<std::size_t> order(inputs.batch());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t s = 0; s < order.size(); s += batch) {
    const std::span<const std::size_t> idx(order.data() + s, std::min(batch, order.size() - s));
    const Tensor xb = gather(inputs, idx);
    const Tensor yb = gather(targets, idx);
    Tape tape;
    const Tensor out = net.forward(xb, tape);
    Tensor g;
    const double v = ssim(out, yb, ranges, &g);
    if (!std::isfinite(v)) fail(ErrorKind::diverged, "pretraining diverged: SSIM is not finite");
    for (double& e : g.values()) e = -e;  // minimize 1 - SSIM
    const auto grad = net.gradient(tape, g);
    adam_step(opt, net.params(), grad);
  }
}

// Per-channel mean over batch and time.
std::vector<double> channel_means(const Tensor& x) {
  std::vector<double> m(x.channels(), 0.0);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t t = 0; t < x.time(); ++t)
      for (std::size_t c = 0; c < x.channels(); ++c) m[c] += x(b, t, c);
  for (double& v : m) v /= static_cast<double>(x.batch() * x.time());
  return m;
}

// SSIM multiplies a luminance and a structure term, so an output channel that
// is negated (negative mean, anticorrelated shape) scores as well as a correct
// one. Starting the linear output at the destination means keeps the
// luminance term positive, and descent never crosses the SSIM = 0 barrier.
void set_output_bias(Network& net, const std::vector<double>& means) {
  const auto& layers = net.layers();
  std::size_t last = layers.size();
  std::size_t offset = 0, last_offset = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::holds_alternative<Conv1d>(layers[i])) {
      last = i;
      last_offset = offset;
    }
    offset += net.layer_params(i).size();
  }
  require(last < layers.size(), ErrorKind::contract, "aligner has no convolution layer");
  const auto& conv = std::get<Conv1d>(layers[last]);
  require(conv.filters == means.size(), ErrorKind::shape, "aligner output width does not match the destination");
  const std::size_t bias = last_offset + net.layer_params(last).size() - conv.filters;
  std::copy(means.begin(), means.end(), net.params().begin() + static_cast<std::ptrdiff_t>(bias));
}

}  // namespace

PretrainReport pretrain_aligners(DbacsModel& m, const Tensor& xs, std::span<const double> ys, const Tensor& xt,
                                 std::span<const double> yt, std::size_t epochs, std::size_t batch_size,
                                 std::uint64_t seed, const AdamConfig& adam) {
  require(xs.batch() > 0 && xt.batch() > 0, ErrorKind::data, "pretraining needs non-empty source and target sets");
  require(ys.size() == xs.batch() && yt.size() == xt.batch(), ErrorKind::shape, "pretraining: one label per sample");
  require(batch_size >= 1, ErrorKind::config, "pretraining batch size must be positive");
  const auto pairs = nearest_label_pairs(ys, yt);
  const Tensor paired_t = gather(xt, pairs);  // row i pairs with source row i
  const auto rs = channel_ranges(xs);
  const auto rt = channel_ranges(xt);

  PretrainReport r;
  set_output_bias(m.F, channel_means(xs));
  set_output_bias(m.G, channel_means(xt));
  r.ssim_f_before = ssim(m.F.forward(paired_t), xs, rs);
  r.ssim_g_before = ssim(m.G.forward(xs), paired_t, rt);
  AdamState of(m.F.param_count(), adam), og(m.G.param_count(), adam);
  std::mt19937_64 rng(seed);
  for (std::size_t e = 0; e < epochs; ++e) {
    ssim_epoch(m.F, of, paired_t, xs, rs, batch_size, rng);
    ssim_epoch(m.G, og, xs, paired_t, rt, batch_size, rng);
  }
  r.ssim_f_after = ssim(m.F.forward(paired_t), xs, rs);
  r.ssim_g_after = ssim(m.G.forward(xs), paired_t, rt);
  return r;
}

}  // namespace hda::dbacs
