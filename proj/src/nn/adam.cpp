#include "hda/nn/adam.hpp"

#include <cmath>

#include "hda/error.hpp"

namespace hda::nn {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, bool maximize) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    fail(ErrorKind::shape, "adam_step: parameter, gradient and moment sizes differ");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) fail(ErrorKind::diverged, "adam_step: non-finite gradient");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double sign = maximize ? -1.0 : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = sign * grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace hda::nn
