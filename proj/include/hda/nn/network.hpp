#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hda/nn/layers.hpp"
#include "hda/nn/tensor.hpp"

namespace hda::nn {

// Intermediates of one forward pass: activations[0] is the input,
// activations[i + 1] the output of layer i.
struct Tape {
  std::vector<Tensor> activations;
  bool empty() const { return activations.empty(); }
};

// Forward pass carrying an input tangent alongside the primal values.
struct TangentTape {
  std::vector<Tensor> activations;
  std::vector<Tensor> tangents;
  bool empty() const { return activations.empty(); }
};

// A static chain of layers over a flat parameter vector. The network itself
// is immutable during forward/backward; all per-pass state lives in the
// caller's tape, so one Network can serve several interleaved passes.
class Network {
 public:
  Network() = default;
  Network(Shape input, std::vector<LayerSpec> layers);

  // Glorot weights / zero biases drawn from a seeded generator.
  void initialize(std::uint64_t seed);

  Shape input_shape() const { return input_; }
  Shape output_shape() const { return shapes_.empty() ? input_ : shapes_.back(); }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  // Output shape of every layer, in order.
  const std::vector<Shape>& layer_shapes() const { return shapes_; }

  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  void set_params(std::span<const double> values);

  // Parameter slice owned by layer i.
  std::span<const double> layer_params(std::size_t i) const;

  Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, Tape& tape) const;

  // Accumulates d(sum(upstream * output))/d(params) into `grad` (length
  // param_count()) and optionally writes the input gradient.
  void backward(const Tape& tape, const Tensor& upstream, std::span<double> grad, Tensor* input_grad = nullptr) const;

  // Convenience: fresh gradient vector.
  std::vector<double> gradient(const Tape& tape, const Tensor& upstream, Tensor* input_grad = nullptr) const;

  // Returns the output tangent for input tangent `dx`; the primal output is
  // the last entry of tape.activations.
  Tensor forward_tangent(const Tensor& x, const Tensor& dx, TangentTape& tape) const;

  // Reverse pass through a tangent forward: `gy` is the adjoint of the
  // primal output, `gdy` the adjoint of the output tangent.
  void backward_tangent(const TangentTape& tape, const Tensor& gy, const Tensor& gdy, std::span<double> grad,
                        Tensor* input_grad = nullptr, Tensor* input_tangent_grad = nullptr) const;

  // FNV-1a over the raw parameter bytes; used to assert which parameter
  // groups a training step touched.
  std::uint64_t param_hash() const;

 private:
  void check_input(const Tensor& x) const;

  Shape input_{};
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> offsets_;  // size layers_.size() + 1
  std::vector<double> params_;
};

}  // namespace hda::nn
