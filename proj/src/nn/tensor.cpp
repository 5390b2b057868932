#include "hda/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hda/error.hpp"

namespace hda::nn {

std::string to_string(Shape s) { return std::to_string(s.time) + "x" + std::to_string(s.channels); }

Tensor Tensor::reshaped(Shape s) const {
  if (s.size() != shape_.size()) {
    fail(ErrorKind::shape, "reshape " + to_string(shape_) + " -> " + to_string(s) + " changes sample size");
  }
  Tensor out = *this;
  out.shape_ = s;
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor gather(const Tensor& src, std::span<const std::size_t> indices) {
  Tensor out(indices.size(), src.shape());
  const std::size_t n = src.shape().size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= src.batch()) fail(ErrorKind::contract, "gather: index out of range");
    std::memcpy(out.data() + i * n, src.data() + indices[i] * n, n * sizeof(double));
  }
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.batch() == 0) return b;
  if (b.batch() == 0) return a;
  if (a.shape() != b.shape()) {
    fail(ErrorKind::shape, "concat: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  }
  Tensor out(a.batch() + b.batch(), a.shape());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace hda::nn
