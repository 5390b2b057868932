#include "hda/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include <Eigen/Dense>

#include "hda/error.hpp"

namespace hda::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;
// Overlapping rows: row t starts `in_channels` doubles after row t-1, which
// turns a padded [time][channel] block into its im2col matrix for free.
using WindowMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// ---------------------------------------------------------------------------
// Convolution kernels (also used by Dense as a kernel-1 convolution over all
// batch*time rows).

struct ConvGeometry {
  std::size_t time = 0;      // input length
  std::size_t padded = 0;    // input length after left padding
  std::size_t out_time = 0;  // output length
  std::size_t in_ch = 0;
  std::size_t filters = 0;
  std::size_t kernel = 1;
  std::size_t pad = 0;

  std::size_t window() const { return kernel * in_ch; }
};

ConvGeometry geometry(const Conv1d& c, std::size_t time) {
  ConvGeometry g;
  g.time = time;
  g.pad = c.padding == Padding::causal ? c.kernel - 1 : 0;
  g.padded = time + g.pad;
  g.out_time = g.padded + 1 - c.kernel;
  g.in_ch = c.in_channels;
  g.filters = c.filters;
  g.kernel = c.kernel;
  return g;
}

// Returns a pointer to [batch][padded][in_ch] data, materialising the zero
// padding into `storage` only when needed.
const double* padded_input(const Tensor& x, const ConvGeometry& g, std::vector<double>& storage) {
  if (g.pad == 0) return x.data();
  storage.assign(x.batch() * g.padded * g.in_ch, 0.0);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    std::memcpy(storage.data() + (b * g.padded + g.pad) * g.in_ch, x.data() + b * g.time * g.in_ch,
                g.time * g.in_ch * sizeof(double));
  }
  return storage.data();
}

WindowMap windows(const double* padded, const ConvGeometry& g, std::size_t b) {
  return WindowMap(padded + b * g.padded * g.in_ch, static_cast<Eigen::Index>(g.out_time),
                   static_cast<Eigen::Index>(g.window()), Eigen::OuterStride<>(static_cast<Eigen::Index>(g.in_ch)));
}

void conv_apply(std::span<const double> params, const ConvGeometry& g, const Tensor& x, Tensor& y, bool with_bias) {
  std::vector<double> storage;
  const double* xp = padded_input(x, g, storage);
  const ConstRowMap w(params.data(), static_cast<Eigen::Index>(g.filters), static_cast<Eigen::Index>(g.window()));
  const Eigen::Map<const Eigen::RowVectorXd> bias(params.data() + g.filters * g.window(),
                                                  static_cast<Eigen::Index>(g.filters));
  y = Tensor(x.batch(), g.out_time, g.filters);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    RowMap yb(y.data() + b * g.out_time * g.filters, static_cast<Eigen::Index>(g.out_time),
              static_cast<Eigen::Index>(g.filters));
    yb.noalias() = windows(xp, g, b) * w.transpose();
    if (with_bias) yb.rowwise() += bias;
  }
}

void conv_weight_grad(const ConvGeometry& g, const Tensor& x, const Tensor& gy, std::span<double> grad,
                      bool with_bias) {
  std::vector<double> storage;
  const double* xp = padded_input(x, g, storage);
  RowMap gw(grad.data(), static_cast<Eigen::Index>(g.filters), static_cast<Eigen::Index>(g.window()));
  Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + g.filters * g.window(), static_cast<Eigen::Index>(g.filters));
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const ConstRowMap gyb(gy.data() + b * g.out_time * g.filters, static_cast<Eigen::Index>(g.out_time),
                          static_cast<Eigen::Index>(g.filters));
    gw.noalias() += gyb.transpose() * windows(xp, g, b);
    if (with_bias) gb += gyb.colwise().sum();
  }
}

void conv_input_grad(std::span<const double> params, const ConvGeometry& g, const Tensor& gy, Tensor& gx) {
  const ConstRowMap w(params.data(), static_cast<Eigen::Index>(g.filters), static_cast<Eigen::Index>(g.window()));
  gx = Tensor(gy.batch(), g.time, g.in_ch);
  RowMat gwin(static_cast<Eigen::Index>(g.out_time), static_cast<Eigen::Index>(g.window()));
  std::vector<double> gpad(g.padded * g.in_ch);
  const std::size_t span = g.window();
  for (std::size_t b = 0; b < gy.batch(); ++b) {
    const ConstRowMap gyb(gy.data() + b * g.out_time * g.filters, static_cast<Eigen::Index>(g.out_time),
                          static_cast<Eigen::Index>(g.filters));
    gwin.noalias() = gyb * w;
    std::fill(gpad.begin(), gpad.end(), 0.0);
    for (std::size_t t = 0; t < g.out_time; ++t) {
      double* dst = gpad.data() + t * g.in_ch;
      const double* src = gwin.data() + t * span;
      for (std::size_t j = 0; j < span; ++j) dst[j] += src[j];
    }
    std::memcpy(gx.data() + b * g.time * g.in_ch, gpad.data() + g.pad * g.in_ch, g.time * g.in_ch * sizeof(double));
  }
}

// Dense layers reuse the kernel-1 path by folding time into the batch axis.
Conv1d as_conv(const Dense& d) { return Conv1d{d.in_features, d.units, 1, Padding::none}; }

Tensor as_rows(const Tensor& x) {
  Tensor rows(x.batch() * x.time(), 1, x.channels());
  std::copy(x.values().begin(), x.values().end(), rows.values().begin());
  return rows;
}

Tensor from_rows(const Tensor& rows, std::size_t batch, std::size_t time) {
  Tensor out(batch, time, rows.channels());
  std::copy(rows.values().begin(), rows.values().end(), out.values().begin());
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise activations: value, first and second derivative.

struct ActivationDerivs {
  double d1;
  double d2;
};

ActivationDerivs derivs(const LeakyRelu& a, double x, double /*y*/) {
  // x == 0 takes the negative-side slope.
  return {x > 0.0 ? 1.0 : a.slope, 0.0};
}
ActivationDerivs derivs(const Sigmoid&, double /*x*/, double y) {
  const double d1 = y * (1.0 - y);
  return {d1, d1 * (1.0 - 2.0 * y)};
}
ActivationDerivs derivs(const Linear&, double, double) { return {1.0, 0.0}; }

double apply(const LeakyRelu& a, double x) { return x > 0.0 ? x : a.slope * x; }
double apply(const Sigmoid&, double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
double apply(const Linear&, double x) { return x; }

template <class Act>
void activation_forward(const Act& a, const Tensor& x, Tensor& y) {
  y = Tensor(x.batch(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y.values()[i] = apply(a, x.values()[i]);
}

template <class Act>
void activation_backward(const Act& a, const Tensor& x, const Tensor& y, const Tensor& gy, Tensor* gx) {
  if (!gx) return;
  *gx = Tensor(x.batch(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx->values()[i] = derivs(a, x.values()[i], y.values()[i]).d1 * gy.values()[i];
}

template <class Act>
void activation_forward_tangent(const Act& a, const Tensor& x, const Tensor& y, const Tensor& dx, Tensor& dy) {
  dy = Tensor(x.batch(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dy.values()[i] = derivs(a, x.values()[i], y.values()[i]).d1 * dx.values()[i];
}

template <class Act>
void activation_backward_tangent(const Act& a, const Tensor& x, const Tensor& y, const Tensor& dx, const Tensor& gy,
                                 const Tensor& gdy, Tensor* gx, Tensor* gdx) {
  if (gx) *gx = Tensor(x.batch(), x.shape());
  if (gdx) *gdx = Tensor(x.batch(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const ActivationDerivs d = derivs(a, x.values()[i], y.values()[i]);
    if (gx) gx->values()[i] = d.d1 * gy.values()[i] + d.d2 * dx.values()[i] * gdy.values()[i];
    if (gdx) gdx->values()[i] = d.d1 * gdy.values()[i];
  }
}

// ---------------------------------------------------------------------------
// Structural layers. All are linear given the max-pool argmax, so the tangent
// path reuses the primal routing.

std::vector<std::size_t> pool_argmax(const MaxPool1d& p, const Tensor& x) {
  const std::size_t out_t = x.time() / p.size;
  std::vector<std::size_t> idx(x.batch() * out_t * x.channels());
  std::size_t k = 0;
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t t = 0; t < out_t; ++t)
      for (std::size_t c = 0; c < x.channels(); ++c) {
        std::size_t best = t * p.size;
        for (std::size_t s = t * p.size + 1; s < (t + 1) * p.size; ++s)
          if (x(b, s, c) > x(b, best, c)) best = s;
        idx[k++] = best;
      }
  return idx;
}

void pool_route_forward(const MaxPool1d& p, const Tensor& x, const Tensor& src, Tensor& dst) {
  const std::size_t out_t = x.time() / p.size;
  const auto idx = pool_argmax(p, x);
  dst = Tensor(x.batch(), out_t, x.channels());
  std::size_t k = 0;
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t t = 0; t < out_t; ++t)
      for (std::size_t c = 0; c < x.channels(); ++c) dst(b, t, c) = src(b, idx[k++], c);
}

void pool_route_backward(const MaxPool1d& p, const Tensor& x, const Tensor& g_out, Tensor& g_in) {
  const std::size_t out_t = x.time() / p.size;
  const auto idx = pool_argmax(p, x);
  g_in = Tensor(x.batch(), x.shape());
  std::size_t k = 0;
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t t = 0; t < out_t; ++t)
      for (std::size_t c = 0; c < x.channels(); ++c) g_in(b, idx[k++], c) += g_out(b, t, c);
}

void upsample_forward(const Upsample1d& u, const Tensor& x, Tensor& y) {
  y = Tensor(x.batch(), x.time() * u.factor, x.channels());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t t = 0; t < y.time(); ++t)
      for (std::size_t c = 0; c < x.channels(); ++c) y(b, t, c) = x(b, t / u.factor, c);
}

void upsample_backward(const Upsample1d& u, const Tensor& gy, Shape in, Tensor& gx) {
  gx = Tensor(gy.batch(), in);
  for (std::size_t b = 0; b < gy.batch(); ++b)
    for (std::size_t t = 0; t < gy.time(); ++t)
      for (std::size_t c = 0; c < gy.channels(); ++c) gx(b, t / u.factor, c) += gy(b, t, c);
}

std::size_t require_positive(std::size_t v, const char* what) {
  if (v == 0) fail(ErrorKind::contract, std::string(what) + " must be >= 1");
  return v;
}

}  // namespace

std::string_view kind_name(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const Conv1d&) { return std::string_view{"conv1d"}; },
                        [](const Dense&) { return std::string_view{"dense"}; },
                        [](const LeakyRelu&) { return std::string_view{"leaky_relu"}; },
                        [](const Sigmoid&) { return std::string_view{"sigmoid"}; },
                        [](const Linear&) { return std::string_view{"linear"}; },
                        [](const MaxPool1d&) { return std::string_view{"maxpool1d"}; },
                        [](const Upsample1d&) { return std::string_view{"upsample1d"}; },
                        [](const Flatten&) { return std::string_view{"flatten"}; },
                    },
                    spec);
}

Shape output_shape(const LayerSpec& spec, Shape in) {
  return std::visit(
      Overloaded{
          [&](const Conv1d& c) {
            require_positive(c.kernel, "conv1d kernel");
            require_positive(c.filters, "conv1d filters");
            if (in.channels != c.in_channels) {
              fail(ErrorKind::shape, "conv1d expects " + std::to_string(c.in_channels) + " input channels, got " +
                                         std::to_string(in.channels));
            }
            if (c.padding == Padding::none && in.time < c.kernel) {
              fail(ErrorKind::shape, "conv1d kernel " + std::to_string(c.kernel) + " longer than input length " +
                                         std::to_string(in.time));
            }
            const std::size_t t = c.padding == Padding::causal ? in.time : in.time + 1 - c.kernel;
            return Shape{t, c.filters};
          },
          [&](const Dense& d) {
            require_positive(d.units, "dense units");
            if (in.channels != d.in_features) {
              fail(ErrorKind::shape, "dense expects " + std::to_string(d.in_features) + " features, got " +
                                         std::to_string(in.channels));
            }
            return Shape{in.time, d.units};
          },
          [&](const MaxPool1d& p) {
            require_positive(p.size, "maxpool1d size");
            if (in.time / p.size == 0) {
              fail(ErrorKind::shape, "maxpool1d size " + std::to_string(p.size) + " exceeds input length " +
                                         std::to_string(in.time));
            }
            return Shape{in.time / p.size, in.channels};
          },
          [&](const Upsample1d& u) {
            require_positive(u.factor, "upsample1d factor");
            return Shape{in.time * u.factor, in.channels};
          },
          [&](const Flatten&) { return Shape{1, in.time * in.channels}; },
          [&](const auto&) { return in; },
      },
      spec);
}

std::size_t param_count(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const Conv1d& c) { return c.filters * c.kernel * c.in_channels + c.filters; },
                        [](const Dense& d) { return d.units * d.in_features + d.units; },
                        [](const auto&) { return std::size_t{0}; },
                    },
                    spec);
}

void init_params(const LayerSpec& spec, std::span<double> params, Rng& rng) {
  std::fill(params.begin(), params.end(), 0.0);
  auto glorot = [&](std::size_t weights, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < weights; ++i) params[i] = dist(rng);
  };
  std::visit(Overloaded{
                 [&](const Conv1d& c) {
                   glorot(c.filters * c.kernel * c.in_channels, static_cast<double>(c.kernel * c.in_channels),
                          static_cast<double>(c.kernel * c.filters));
                 },
                 [&](const Dense& d) {
                   glorot(d.units * d.in_features, static_cast<double>(d.in_features), static_cast<double>(d.units));
                 },
                 [](const auto&) {},
             },
             spec);
}

void layer_forward(const LayerSpec& spec, std::span<const double> params, const Tensor& x, Tensor& y) {
  std::visit(Overloaded{
                 [&](const Conv1d& c) { conv_apply(params, geometry(c, x.time()), x, y, true); },
                 [&](const Dense& d) {
                   Tensor rows;
                   conv_apply(params, geometry(as_conv(d), 1), as_rows(x), rows, true);
                   y = from_rows(rows, x.batch(), x.time());
                 },
                 [&](const LeakyRelu& a) { activation_forward(a, x, y); },
                 [&](const Sigmoid& a) { activation_forward(a, x, y); },
                 [&](const Linear& a) { activation_forward(a, x, y); },
                 [&](const MaxPool1d& p) { pool_route_forward(p, x, x, y); },
                 [&](const Upsample1d& u) { upsample_forward(u, x, y); },
                 [&](const Flatten&) { y = x.reshaped({1, x.shape().size()}); },
             },
             spec);
}

void layer_backward(const LayerSpec& spec, std::span<const double> params, const Tensor& x, const Tensor& y,
                    const Tensor& gy, Tensor* gx, std::span<double> grad) {
  std::visit(Overloaded{
                 [&](const Conv1d& c) {
                   const auto g = geometry(c, x.time());
                   conv_weight_grad(g, x, gy, grad, true);
                   if (gx) conv_input_grad(params, g, gy, *gx);
                 },
                 [&](const Dense& d) {
                   const auto g = geometry(as_conv(d), 1);
                   const Tensor xr = as_rows(x);
                   const Tensor gyr = as_rows(gy);
                   conv_weight_grad(g, xr, gyr, grad, true);
                   if (gx) {
                     Tensor gxr;
                     conv_input_grad(params, g, gyr, gxr);
                     *gx = from_rows(gxr, x.batch(), x.time());
                   }
                 },
                 [&](const LeakyRelu& a) { activation_backward(a, x, y, gy, gx); },
                 [&](const Sigmoid& a) { activation_backward(a, x, y, gy, gx); },
                 [&](const Linear& a) { activation_backward(a, x, y, gy, gx); },
                 [&](const MaxPool1d& p) {
                   if (gx) pool_route_backward(p, x, gy, *gx);
                 },
                 [&](const Upsample1d& u) {
                   if (gx) upsample_backward(u, gy, x.shape(), *gx);
                 },
                 [&](const Flatten&) {
                   if (gx) *gx = gy.reshaped(x.shape());
                 },
             },
             spec);
}

void layer_forward_tangent(const LayerSpec& spec, std::span<const double> params, const Tensor& x, const Tensor& y,
                           const Tensor& dx, Tensor& dy) {
  std::visit(Overloaded{
                 [&](const Conv1d& c) { conv_apply(params, geometry(c, x.time()), dx, dy, false); },
                 [&](const Dense& d) {
                   Tensor rows;
                   conv_apply(params, geometry(as_conv(d), 1), as_rows(dx), rows, false);
                   dy = from_rows(rows, x.batch(), x.time());
                 },
                 [&](const LeakyRelu& a) { activation_forward_tangent(a, x, y, dx, dy); },
                 [&](const Sigmoid& a) { activation_forward_tangent(a, x, y, dx, dy); },
                 [&](const Linear& a) { activation_forward_tangent(a, x, y, dx, dy); },
                 [&](const MaxPool1d& p) { pool_route_forward(p, x, dx, dy); },
                 [&](const Upsample1d& u) { upsample_forward(u, dx, dy); },
                 [&](const Flatten&) { dy = dx.reshaped({1, dx.shape().size()}); },
             },
             spec);
}

void layer_backward_tangent(const LayerSpec& spec, std::span<const double> params, const Tensor& x,
                            const Tensor& y, const Tensor& dx, const Tensor& gy, const Tensor& gdy, Tensor* gx,
                            Tensor* gdx, std::span<double> grad) {
  std::visit(Overloaded{
                 [&](const Conv1d& c) {
                   const auto g = geometry(c, x.time());
                   conv_weight_grad(g, x, gy, grad, true);
                   conv_weight_grad(g, dx, gdy, grad, false);
                   if (gx) conv_input_grad(params, g, gy, *gx);
                   if (gdx) conv_input_grad(params, g, gdy, *gdx);
                 },
                 [&](const Dense& d) {
                   const auto g = geometry(as_conv(d), 1);
                   const Tensor gyr = as_rows(gy);
                   const Tensor gdyr = as_rows(gdy);
                   conv_weight_grad(g, as_rows(x), gyr, grad, true);
                   conv_weight_grad(g, as_rows(dx), gdyr, grad, false);
                   Tensor tmp;
                   if (gx) {
                     conv_input_grad(params, g, gyr, tmp);
                     *gx = from_rows(tmp, x.batch(), x.time());
                   }
                   if (gdx) {
                     conv_input_grad(params, g, gdyr, tmp);
                     *gdx = from_rows(tmp, x.batch(), x.time());
                   }
                 },
                 [&](const LeakyRelu& a) { activation_backward_tangent(a, x, y, dx, gy, gdy, gx, gdx); },
                 [&](const Sigmoid& a) { activation_backward_tangent(a, x, y, dx, gy, gdy, gx, gdx); },
                 [&](const Linear& a) { activation_backward_tangent(a, x, y, dx, gy, gdy, gx, gdx); },
                 [&](const MaxPool1d& p) {
                   if (gx) pool_route_backward(p, x, gy, *gx);
                   if (gdx) pool_route_backward(p, x, gdy, *gdx);
                 },
                 [&](const Upsample1d& u) {
                   if (gx) upsample_backward(u, gy, x.shape(), *gx);
                   if (gdx) upsample_backward(u, gdy, x.shape(), *gdx);
                 },
                 [&](const Flatten&) {
                   if (gx) *gx = gy.reshaped(x.shape());
                   if (gdx) *gdx = gdy.reshaped(x.shape());
                 },
             },
             spec);
}

}  // namespace hda::nn
