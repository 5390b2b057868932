#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "hda/error.hpp"
#include "hda/nn/adam.hpp"
#include "hda/nn/checkpoint.hpp"
#include "hda/nn/grad_check.hpp"
#include "hda/nn/network.hpp"

using namespace hda;
using namespace hda::nn;

namespace {

Tensor random_tensor(std::size_t b, std::size_t t, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Tensor x(b, t, c);
  for (double& v : x.values()) v = n(rng);
  return x;
}

// Half squared error against a fixed random target.
OutputLoss l2_loss(const Tensor& target) {
  return [target](const Tensor& out, Tensor* grad) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = out.values()[i] - target.values()[i];
      s += 0.5 * d * d;
      if (grad) grad->values()[i] = d;
    }
    return s;
  };
}

// Weighted sum of outputs: smooth and free of loss-side kinks.
OutputLoss weighted_sum(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> w(n);
  for (double& v : w) v = d(rng);
  return [w](const Tensor& out, Tensor* grad) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      s += w[i] * out.values()[i];
      if (grad) grad->values()[i] = w[i];
    }
    return s;
  };
}

Network initialized(Shape in, std::vector<LayerSpec> layers, std::uint64_t seed) {
  Network net(in, std::move(layers));
  net.initialize(seed);
  return net;
}

}  // namespace

TEST(Forward, DenseIdentityIsIdentity) {
  Network net({4, 3}, {Dense{3, 3}});
  std::vector<double> p(net.param_count(), 0.0);
  for (int i = 0; i < 3; ++i) p[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  net.set_params(p);
  const Tensor x = random_tensor(2, 4, 3, 1);
  const Tensor y = net.forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.values()[i], x.values()[i]);
}

TEST(Forward, CausalConvRampsOnConstantInput) {
  Network net({6, 1}, {Conv1d{1, 1, 3, Padding::causal}});
  std::vector<double> p = {1.0, 1.0, 1.0, 0.0};
  net.set_params(p);
  const double c = 2.5;
  const Tensor y = net.forward(Tensor(1, 6, 1, c));
  const std::vector<double> expected = {c, 2 * c, 3 * c, 3 * c, 3 * c, 3 * c};
  for (std::size_t t = 0; t < 6; ++t) EXPECT_DOUBLE_EQ(y(0, t, 0), expected[t]);
}

TEST(Forward, CausalConvOnlySeesThePast) {
  Network net = initialized({8, 2}, {Conv1d{2, 3, 4, Padding::causal}}, 3);
  Tensor x = random_tensor(1, 8, 2, 4);
  const Tensor y0 = net.forward(x);
  x(0, 5, 0) += 1.0;
  const Tensor y1 = net.forward(x);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t f = 0; f < 3; ++f) EXPECT_EQ(y0(0, t, f), y1(0, t, f));
}

TEST(Forward, ValidConvMatchesDirectSum) {
  Network net = initialized({7, 2}, {Conv1d{2, 3, 3, Padding::none}}, 5);
  const Tensor x = random_tensor(2, 7, 2, 6);
  const Tensor y = net.forward(x);
  ASSERT_EQ(y.time(), 5u);
  const auto p = net.params();
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t f = 0; f < 3; ++f) {
        double s = p[3 * 3 * 2 + f];
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t c = 0; c < 2; ++c) s += p[(f * 3 + k) * 2 + c] * x(b, t + k, c);
        EXPECT_NEAR(y(b, t, f), s, 1e-12);
      }
}

TEST(Forward, ShapeAlgebra) {
  EXPECT_EQ(output_shape(Conv1d{3, 5, 7, Padding::causal}, {20, 3}), (Shape{20, 5}));
  EXPECT_EQ(output_shape(MaxPool1d{3}, {20, 5}), (Shape{6, 5}));
  EXPECT_EQ(output_shape(Upsample1d{3}, {6, 5}), (Shape{18, 5}));
  EXPECT_EQ(output_shape(Flatten{}, {6, 5}), (Shape{1, 30}));
}

TEST(Forward, ShapeMismatchNamesLayer) {
  Network net({8, 2}, {Conv1d{2, 3, 3, Padding::causal}});
  try {
    net.forward(Tensor(1, 8, 3));
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
    EXPECT_NE(std::string(e.what()).find("layer 0 (conv1d)"), std::string::npos);
  }
  try {
    Network bad({8, 2}, {Flatten{}, Dense{10, 1}});
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1 (dense)"), std::string::npos);
  }
}

TEST(Forward, LeakyReluSlopeAtZeroAndNegative) {
  Network net({1, 3}, {LeakyRelu{}});
  Tensor x(1, 1, 3);
  x(0, 0, 0) = -1.0;
  x(0, 0, 1) = 0.0;
  x(0, 0, 2) = 2.0;
  Tape tape;
  const Tensor y = net.forward(x, tape);
  EXPECT_DOUBLE_EQ(y(0, 0, 0), -0.2);
  EXPECT_DOUBLE_EQ(y(0, 0, 2), 2.0);
  Tensor gx;
  net.gradient(tape, Tensor(1, 1, 3, 1.0), &gx);
  EXPECT_DOUBLE_EQ(gx(0, 0, 0), 0.2);
  EXPECT_DOUBLE_EQ(gx(0, 0, 1), 0.2);
  EXPECT_DOUBLE_EQ(gx(0, 0, 2), 1.0);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Network net = initialized({8, 2}, {Conv1d{2, 4, 3}, LeakyRelu{}, Flatten{}, Dense{32, 1}, Sigmoid{}}, 1);
  Tape tape;
  const Tensor y = net.forward(random_tensor(3, 8, 2, 2), tape);
  const auto g = net.gradient(tape, Tensor(y.batch(), y.shape()));
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Backward, ScalarDenseGradientIsInput) {
  Network net({1, 1}, {Dense{1, 1}});
  net.set_params(std::vector<double>{0.7, 0.0});
  Tensor x(1, 1, 1, 3.25);
  Tape tape;
  net.forward(x, tape);
  const auto g = net.gradient(tape, Tensor(1, 1, 1, 1.0));
  EXPECT_DOUBLE_EQ(g[0], 3.25);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
}

TEST(Backward, WithoutTapeIsUsageError) {
  Network net({2, 1}, {Dense{1, 1}});
  std::vector<double> g(net.param_count());
  try {
    net.backward(Tape{}, Tensor(1, 2, 1), g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::usage);
  }
}

struct LayerCase {
  const char* name;
  Shape input;
  std::vector<LayerSpec> layers;
};

class EveryLayerKind : public ::testing::TestWithParam<int> {};

std::vector<LayerCase> layer_cases() {
  return {
      {"conv1d_causal", {9, 3}, {Conv1d{3, 4, 3, Padding::causal}}},
      {"conv1d_valid", {9, 3}, {Conv1d{3, 2, 4, Padding::none}}},
      {"dense", {5, 3}, {Dense{3, 4}}},
      {"leaky_relu", {6, 2}, {Dense{2, 3}, LeakyRelu{}}},
      {"sigmoid", {6, 2}, {Dense{2, 3}, Sigmoid{}}},
      {"linear", {6, 2}, {Dense{2, 3}, Linear{}}},
      {"maxpool1d", {9, 2}, {Conv1d{2, 3, 2}, MaxPool1d{2}}},
      {"upsample1d", {4, 2}, {Conv1d{2, 3, 2}, Upsample1d{3}}},
      {"flatten", {4, 2}, {Conv1d{2, 3, 2}, Flatten{}, Dense{12, 2}}},
  };
}

TEST_P(EveryLayerKind, GradientMatchesFiniteDifferences) {
  const LayerCase c = layer_cases()[static_cast<std::size_t>(GetParam())];
  Network net = initialized(c.input, c.layers, 100 + static_cast<std::uint64_t>(GetParam()));
  const Tensor x = random_tensor(3, c.input.time, c.input.channels, 200 + static_cast<std::uint64_t>(GetParam()));
  const Tensor out = net.forward(x);
  const double err = grad_check(net, x, weighted_sum(out.size(), 7));
  EXPECT_LE(err, 1e-4) << c.name;
}

// Input gradient of a scalar function of the output, checked against central
// differences in the input.
TEST_P(EveryLayerKind, InputGradientMatchesFiniteDifferences) {
  const LayerCase c = layer_cases()[static_cast<std::size_t>(GetParam())];
  Network net = initialized(c.input, c.layers, 300 + static_cast<std::uint64_t>(GetParam()));
  Tensor x = random_tensor(2, c.input.time, c.input.channels, 400 + static_cast<std::uint64_t>(GetParam()));
  const OutputLoss loss = weighted_sum(net.forward(x).size(), 9);
  Tape tape;
  const Tensor out = net.forward(x, tape);
  Tensor up(out.batch(), out.shape());
  loss(out, &up);
  Tensor gx;
  net.gradient(tape, up, &gx);
  const double err = finite_difference_check(x.values(), gx.values(), [&] { return loss(net.forward(x), nullptr); });
  EXPECT_LE(err, 1e-4) << c.name;
}

// Reverse-over-forward path: d/dparams of <w, J_x f(x) v> + <u, f(x)>.
TEST_P(EveryLayerKind, TangentBackwardMatchesFiniteDifferences) {
  const LayerCase c = layer_cases()[static_cast<std::size_t>(GetParam())];
  Network net = initialized(c.input, c.layers, 500 + static_cast<std::uint64_t>(GetParam()));
  const Tensor x = random_tensor(2, c.input.time, c.input.channels, 600 + static_cast<std::uint64_t>(GetParam()));
  const Tensor v = random_tensor(2, c.input.time, c.input.channels, 700 + static_cast<std::uint64_t>(GetParam()));
  const std::size_t n_out = net.forward(x).size();
  const OutputLoss primal = weighted_sum(n_out, 11);
  const OutputLoss tangent = weighted_sum(n_out, 12);
  auto objective = [&] {
    TangentTape tt;
    const Tensor dy = net.forward_tangent(x, v, tt);
    return primal(tt.activations.back(), nullptr) + tangent(dy, nullptr);
  };
  TangentTape tt;
  const Tensor dy = net.forward_tangent(x, v, tt);
  Tensor gy(dy.batch(), dy.shape());
  Tensor gdy(dy.batch(), dy.shape());
  primal(tt.activations.back(), &gy);
  tangent(dy, &gdy);
  std::vector<double> grad(net.param_count(), 0.0);
  net.backward_tangent(tt, gy, gdy, grad);
  EXPECT_LE(finite_difference_check(net.params(), grad, objective), 1e-4) << c.name;
}

INSTANTIATE_TEST_SUITE_P(Layers, EveryLayerKind, ::testing::Range(0, 9));

TEST(GradCheck, LinearRegressionWithMaeAwayFromKinks) {
  Network net = initialized({1, 4}, {Dense{4, 1}}, 21);
  const Tensor x = random_tensor(16, 1, 4, 22);
  const Tensor out = net.forward(x);
  Tensor target = out;
  for (std::size_t i = 0; i < target.size(); ++i) target.values()[i] += (i % 2 ? 1.0 : -1.0);
  OutputLoss mae = [target](const Tensor& o, Tensor* g) {
    double s = 0.0;
    const double n = static_cast<double>(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double d = o.values()[i] - target.values()[i];
      s += std::abs(d) / n;
      if (g) g->values()[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n;
    }
    return s;
  };
  EXPECT_LE(grad_check(net, x, mae), 1e-4);
}

TEST(GradCheck, TwoLayerConvNetL2) {
  Network net = initialized({12, 3}, {Conv1d{3, 5, 3}, LeakyRelu{}, Conv1d{5, 2, 3}}, 23);
  const Tensor x = random_tensor(4, 12, 3, 24);
  EXPECT_LE(grad_check(net, x, l2_loss(random_tensor(4, 12, 2, 25))), 1e-4);
}

TEST(GradCheck, ZeroWeightSigmoidConstantTarget) {
  Network net({6, 2}, {Flatten{}, Dense{12, 1}, Sigmoid{}});
  const Tensor x = random_tensor(4, 6, 2, 26);
  EXPECT_LE(grad_check(net, x, l2_loss(Tensor(4, 1, 1, 0.9))), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p = {1.0, -2.0, 3.0};
  AdamState s(3, kPredictorAdam);
  std::vector<double> g(3, 0.0);
  for (int i = 0; i < 5; ++i) adam_step(s, p, g);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  std::vector<double> p = {0.5, 0.5, 0.5};
  const std::vector<double> g = {2.0, -0.3, 0.05};
  AdamState s(3, AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  adam_step(s, p, g);
  EXPECT_NEAR(p[0] - 0.5, -1e-3, 1e-9);
  EXPECT_NEAR(p[1] - 0.5, 1e-3, 1e-9);
  EXPECT_NEAR(p[2] - 0.5, -1e-3, 1e-9);
}

TEST(Adam, MaximizeFlipsUpdateExactly) {
  const std::vector<double> g = {0.4, -1.2, 0.05};
  std::vector<double> down = {1.0, 1.0, 1.0};
  std::vector<double> up = down;
  AdamState s1(3, kAdversarialAdam);
  AdamState s2(3, kAdversarialAdam);
  for (int i = 0; i < 3; ++i) {
    adam_step(s1, down, g, false);
    adam_step(s2, up, g, true);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(down[i] - 1.0, -(up[i] - 1.0));
}

TEST(Adam, NonFiniteGradientDiverges) {
  std::vector<double> p = {1.0};
  AdamState s(1, kPredictorAdam);
  const std::vector<double> g = {std::nan("")};
  try {
    adam_step(s, p, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::diverged);
  }
  EXPECT_EQ(p[0], 1.0);
}

TEST(Determinism, SameSeedSameParametersAfterTraining) {
  auto run = [] {
    Network net = initialized({10, 2}, {Conv1d{2, 4, 3}, LeakyRelu{}, Flatten{}, Dense{40, 1}}, 31);
    AdamState s(net.param_count(), kPredictorAdam);
    const Tensor x = random_tensor(8, 10, 2, 32);
    const OutputLoss loss = l2_loss(random_tensor(8, 1, 1, 33));
    for (int step = 0; step < 25; ++step) {
      Tape tape;
      const Tensor out = net.forward(x, tape);
      Tensor up(out.batch(), out.shape());
      loss(out, &up);
      adam_step(s, net.params(), net.gradient(tape, up));
    }
    return std::vector<double>(net.params().begin(), net.params().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsLossless) {
  Network net = initialized({16, 3},
                            {Conv1d{3, 4, 5}, LeakyRelu{0.2}, MaxPool1d{2}, Upsample1d{2}, Conv1d{4, 2, 1, Padding::none},
                             Flatten{}, Dense{32, 1}, Sigmoid{}, Linear{}},
                            41);
  const auto path = std::filesystem::temp_directory_path() / "hda_nn_checkpoint_test.json";
  save_network(path, net, {41, 17});
  CheckpointMeta meta;
  const Network back = load_network(path, &meta);
  EXPECT_EQ(meta.seed, 41u);
  EXPECT_EQ(meta.step, 17u);
  ASSERT_EQ(back.param_count(), net.param_count());
  EXPECT_EQ(back.param_hash(), net.param_hash());
  EXPECT_EQ(network_to_json(back, meta).dump(), network_to_json(net, {41, 17}).dump());
  std::filesystem::remove(path);
}

TEST(Checkpoint, MissingFileIsMissingArtifact) {
  try {
    load_network("/nonexistent/dir/net.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_artifact);
  }
}
