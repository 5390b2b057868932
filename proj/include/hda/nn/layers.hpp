#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <variant>

#include "hda/nn/tensor.hpp"

namespace hda::nn {

using Rng = std::mt19937_64;

enum class Padding { causal, none };

// Stride-1 temporal convolution. Causal padding left-pads each sample with
// kernel-1 zeros so the output keeps the input length and step t only sees
// inputs at steps <= t. Weights are stored [filter][tap][in_channel] followed
// by one bias per filter.
struct Conv1d {
  std::size_t in_channels = 0;
  std::size_t filters = 0;
  std::size_t kernel = 1;
  Padding padding = Padding::causal;
};

// Fully connected map over the channel axis, applied independently at every
// time step (after a Flatten this is the usual dense layer).
struct Dense {
  std::size_t in_features = 0;
  std::size_t units = 0;
};

struct LeakyRelu {
  double slope = 0.2;
};
struct Sigmoid {};
struct Linear {};

// Non-overlapping max over windows of `size` steps; trailing steps that do
// not fill a window are dropped. Ties go to the earliest step.
struct MaxPool1d {
  std::size_t size = 2;
};

// Nearest-neighbour repetition of every step `factor` times.
struct Upsample1d {
  std::size_t factor = 2;
};

struct Flatten {};

using LayerSpec = std::variant<Conv1d, Dense, LeakyRelu, Sigmoid, Linear, MaxPool1d, Upsample1d, Flatten>;

std::string_view kind_name(const LayerSpec& spec);
Shape output_shape(const LayerSpec& spec, Shape in);
std::size_t param_count(const LayerSpec& spec);

// Glorot-uniform weights, zero biases.
void init_params(const LayerSpec& spec, std::span<double> params, Rng& rng);

// Layer primitives. `params` is the layer's slice of the network parameter
// vector; gradients are accumulated (+=) into `grad`. Input gradients are
// written (not accumulated) when the pointer is non-null.
void layer_forward(const LayerSpec& spec, std::span<const double> params, const Tensor& x, Tensor& y);
void layer_backward(const LayerSpec& spec, std::span<const double> params, const Tensor& x, const Tensor& y,
                    const Tensor& gy, Tensor* gx, std::span<double> grad);

// Forward-mode companions used for input-gradient penalties: `dx` is a
// tangent of the input, `dy` receives the tangent of the output. The
// matching backward propagates adjoints of both the primal (gy) and the
// tangent (gdy) output.
void layer_forward_tangent(const LayerSpec& spec, std::span<const double> params, const Tensor& x, const Tensor& y,
                           const Tensor& dx, Tensor& dy);
void layer_backward_tangent(const LayerSpec& spec, std::span<const double> params, const Tensor& x,
                            const Tensor& y, const Tensor& dx, const Tensor& gy, const Tensor& gdy, Tensor* gx,
                            Tensor* gdx, std::span<double> grad);

}  // namespace hda::nn
