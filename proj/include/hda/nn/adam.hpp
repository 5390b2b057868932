#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hda::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Settings used for the aligners and critics.
inline constexpr AdamConfig kAdversarialAdam{1e-4, 0.5, 0.9, 1e-8};
// Settings used for standalone predictor training.
inline constexpr AdamConfig kPredictorAdam{1e-3, 0.9, 0.999, 1e-8};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : config(cfg), first_moment(n, 0.0), second_moment(n, 0.0) {}
};

// One bias-corrected Adam update in place. With `maximize` the gradient is
// negated, i.e. the parameters ascend. Throws ErrorKind::diverged on a
// non-finite gradient (parameters are left untouched in that case).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, bool maximize = false);

}  // namespace hda::nn
