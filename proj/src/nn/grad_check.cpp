#include "hda/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hda/error.hpp"

namespace hda::nn {

double finite_difference_check(std::span<double> params, std::span<const double> analytic,
                               const std::function<double()>& loss, const GradCheckOptions& options) {
  if (params.size() != analytic.size()) fail(ErrorKind::shape, "finite_difference_check: size mismatch");
  std::vector<std::size_t> idx(params.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (idx.size() > options.max_params) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(options.max_params);
  }
  double worst = 0.0;
  for (std::size_t i : idx) {
    const double saved = params[i];
    params[i] = saved + options.step;
    const double up = loss();
    params[i] = saved - options.step;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double err = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

double grad_check(Network& net, const Tensor& batch, const OutputLoss& loss, const GradCheckOptions& options) {
  Tape tape;
  const Tensor out = net.forward(batch, tape);
  Tensor upstream(out.batch(), out.shape());
  loss(out, &upstream);
  const std::vector<double> analytic = net.gradient(tape, upstream);
  return finite_difference_check(net.params(), analytic, [&] { return loss(net.forward(batch), nullptr); }, options);
}

}  // namespace hda::nn
