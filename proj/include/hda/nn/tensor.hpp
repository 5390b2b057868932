#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hda::nn {

// Per-sample shape: time steps x channels.
struct Shape {
  std::size_t time = 0;
  std::size_t channels = 0;

  std::size_t size() const { return time * channels; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(Shape s);

// Dense batch of time series, laid out [batch][time][channel].
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t batch, Shape shape, double fill = 0.0)
      : batch_(batch), shape_(shape), data_(batch * shape.size(), fill) {}
  Tensor(std::size_t batch, std::size_t time, std::size_t channels, double fill = 0.0)
      : Tensor(batch, Shape{time, channels}, fill) {}

  std::size_t batch() const { return batch_; }
  std::size_t time() const { return shape_.time; }
  std::size_t channels() const { return shape_.channels; }
  Shape shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t b, std::size_t t, std::size_t c) {
    return data_[(b * shape_.time + t) * shape_.channels + c];
  }
  double operator()(std::size_t b, std::size_t t, std::size_t c) const {
    return data_[(b * shape_.time + t) * shape_.channels + c];
  }

  std::span<double> sample(std::size_t b) { return {data_.data() + b * shape_.size(), shape_.size()}; }
  std::span<const double> sample(std::size_t b) const {
    return {data_.data() + b * shape_.size(), shape_.size()};
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  // Same data viewed with a different per-sample shape of equal size.
  Tensor reshaped(Shape s) const;

  void fill(double v);

 private:
  std::size_t batch_ = 0;
  Shape shape_{};
  std::vector<double> data_;
};

// Rows of `src` selected by index, in order.
Tensor gather(const Tensor& src, std::span<const std::size_t> indices);

// Concatenates along the batch axis; all inputs must share a shape.
Tensor concat(const Tensor& a, const Tensor& b);

bool all_finite(const Tensor& t);

}  // namespace hda::nn
