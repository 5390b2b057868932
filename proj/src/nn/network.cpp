#include "hda/nn/network.hpp"

#include <algorithm>
#include <cstring>

#include "hda/error.hpp"

namespace hda::nn {

namespace {

std::string layer_label(std::size_t i, const LayerSpec& spec) {
  return "layer " + std::to_string(i) + " (" + std::string(kind_name(spec)) + ")";
}

}  // namespace

Network::Network(Shape input, std::vector<LayerSpec> layers) : input_(input), layers_(std::move(layers)) {
  Shape s = input_;
  offsets_.push_back(0);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      s = nn::output_shape(layers_[i], s);
    } catch (const Error& e) {
      fail(e.kind(), layer_label(i, layers_[i]) + ": " + e.what());
    }
    shapes_.push_back(s);
    offsets_.push_back(offsets_.back() + nn::param_count(layers_[i]));
  }
  params_.assign(offsets_.back(), 0.0);
}

void Network::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    init_params(layers_[i], std::span<double>(params_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]), rng);
  }
}

void Network::set_params(std::span<const double> values) {
  if (values.size() != params_.size()) {
    fail(ErrorKind::shape, "set_params: expected " + std::to_string(params_.size()) + " values, got " +
                               std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

std::span<const double> Network::layer_params(std::size_t i) const {
  return std::span<const double>(params_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

void Network::check_input(const Tensor& x) const {
  if (x.shape() != input_) {
    const std::string where = layers_.empty() ? std::string("network input") : layer_label(0, layers_[0]);
    fail(ErrorKind::shape, where + ": expected input " + to_string(input_) + ", got " + to_string(x.shape()));
  }
}

Tensor Network::forward(const Tensor& x) const {
  check_input(x);
  Tensor cur = x;
  Tensor next;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layer_forward(layers_[i], layer_params(i), cur, next);
    std::swap(cur, next);
  }
  return cur;
}

Tensor Network::forward(const Tensor& x, Tape& tape) const {
  check_input(x);
  tape.activations.clear();
  tape.activations.reserve(layers_.size() + 1);
  tape.activations.push_back(x);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Tensor y;
    layer_forward(layers_[i], layer_params(i), tape.activations.back(), y);
    tape.activations.push_back(std::move(y));
  }
  return tape.activations.back();
}

void Network::backward(const Tape& tape, const Tensor& upstream, std::span<double> grad, Tensor* input_grad) const {
  if (tape.activations.size() != layers_.size() + 1) {
    fail(ErrorKind::usage, "backward called without a matching forward tape");
  }
  if (grad.size() != params_.size()) fail(ErrorKind::shape, "backward: gradient buffer has wrong length");
  if (upstream.shape() != output_shape() || upstream.batch() != tape.activations.back().batch()) {
    fail(ErrorKind::shape, "backward: upstream " + to_string(upstream.shape()) + " does not match output " +
                               to_string(output_shape()));
  }
  Tensor g = upstream;
  Tensor gx;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const bool need_input = k > 0 || input_grad != nullptr;
    layer_backward(layers_[k], layer_params(k), tape.activations[k], tape.activations[k + 1], g,
                   need_input ? &gx : nullptr, grad.subspan(offsets_[k], offsets_[k + 1] - offsets_[k]));
    if (need_input) std::swap(g, gx);
  }
  if (input_grad) *input_grad = layers_.empty() ? upstream : std::move(g);
}

std::vector<double> Network::gradient(const Tape& tape, const Tensor& upstream, Tensor* input_grad) const {
  std::vector<double> grad(params_.size(), 0.0);
  backward(tape, upstream, grad, input_grad);
  return grad;
}

Tensor Network::forward_tangent(const Tensor& x, const Tensor& dx, TangentTape& tape) const {
  check_input(x);
  if (dx.shape() != x.shape() || dx.batch() != x.batch()) fail(ErrorKind::shape, "forward_tangent: tangent shape");
  tape.activations.assign(1, x);
  tape.tangents.assign(1, dx);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Tensor y;
    Tensor dy;
    layer_forward(layers_[i], layer_params(i), tape.activations.back(), y);
    layer_forward_tangent(layers_[i], layer_params(i), tape.activations.back(), y, tape.tangents.back(), dy);
    tape.activations.push_back(std::move(y));
    tape.tangents.push_back(std::move(dy));
  }
  return tape.tangents.back();
}

void Network::backward_tangent(const TangentTape& tape, const Tensor& gy, const Tensor& gdy, std::span<double> grad,
                               Tensor* input_grad, Tensor* input_tangent_grad) const {
  if (tape.activations.size() != layers_.size() + 1 || tape.tangents.size() != layers_.size() + 1) {
    fail(ErrorKind::usage, "backward_tangent called without a matching tangent tape");
  }
  if (grad.size() != params_.size()) fail(ErrorKind::shape, "backward_tangent: gradient buffer has wrong length");
  Tensor g = gy;
  Tensor gd = gdy;
  Tensor gx;
  Tensor gdx;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    layer_backward_tangent(layers_[k], layer_params(k), tape.activations[k], tape.activations[k + 1],
                           tape.tangents[k], g, gd, &gx, &gdx,
                           grad.subspan(offsets_[k], offsets_[k + 1] - offsets_[k]));
    std::swap(g, gx);
    std::swap(gd, gdx);
  }
  if (input_grad) *input_grad = std::move(g);
  if (input_tangent_grad) *input_tangent_grad = std::move(gd);
}

std::uint64_t Network::param_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(params_.data());
  for (std::size_t i = 0; i < params_.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace hda::nn
