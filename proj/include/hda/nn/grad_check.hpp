#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "hda/nn/network.hpp"

namespace hda::nn {

// Scalar loss over a network output; writes d(loss)/d(output) into `grad`
// when it is non-null.
using OutputLoss = std::function<double(const Tensor& output, Tensor* grad)>;

struct GradCheckOptions {
  double step = 1e-4;            // central-difference half width
  std::size_t max_params = 200;  // parameters sampled (all when fewer)
  std::uint64_t seed = 0;
};

// Max over sampled parameters of |analytic - numeric| / (|analytic| + |numeric| + 1e-12),
// with the numeric derivative taken by central differences on `loss`.
// `params` is perturbed in place and restored.
double finite_difference_check(std::span<double> params, std::span<const double> analytic,
                               const std::function<double()>& loss, const GradCheckOptions& options = {});

double grad_check(Network& net, const Tensor& batch, const OutputLoss& loss, const GradCheckOptions& options = {});

}  // namespace hda::nn
