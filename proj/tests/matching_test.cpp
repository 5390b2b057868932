#include "hda/matching.hpp"

#include <gtest/gtest.h>

#include <random>

#include "hda/error.hpp"

using namespace hda;
using namespace hda::matching;

namespace {

Tensor random_tensor(std::size_t B, std::size_t T, std::size_t C, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor x(B, T, C);
  for (double& v : x.values()) v = u(rng);
  return x;
}

Network pointwise(std::size_t T, std::size_t in, std::size_t out, double diag) {
  Network n(nn::Shape{T, in}, {nn::Dense{in, out}, nn::Linear{}});
  auto p = n.params();
  std::fill(p.begin(), p.end(), 0.0);
  for (std::size_t f = 0; f < std::min(in, out); ++f) p[f * in + f] = diag;
  return n;
}

}  // namespace

TEST(Groups, ThreeLabelsOneEach) {
  const std::vector<double> y = {0.05, 0.5, 0.95};
  const auto g = group_by_label(y);
  for (int i = 0; i < 3; ++i) {
    ASSERT_EQ(g[i].members.size(), 1u);
    EXPECT_EQ(g[i].members[0], static_cast<std::size_t>(i));
  }
}

TEST(Groups, BoundariesAndGaps) {
  const std::vector<double> y = {0.25, 0.1, 0.4, 0.6, 0.9, 1.0, 0.0, 0.61};
  const auto g = group_by_label(y);
  EXPECT_EQ(g[kLow].members, (std::vector<std::size_t>{6}));        // 0.1 is excluded
  EXPECT_EQ(g[kMiddle].members, (std::vector<std::size_t>{2, 3}));  // both ends included
  EXPECT_EQ(g[kHigh].members, (std::vector<std::size_t>{5}));       // 0.9 is excluded
}

TEST(Groups, MatchBruteForceScanAndAreIdempotent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(500);
  for (double& v : y) v = u(rng);
  const auto g = group_by_label(y);
  std::size_t low = 0, mid = 0, high = 0;
  for (double v : y) {
    low += v >= 0.0 && v < 0.1;
    mid += v >= 0.4 && v <= 0.6;
    high += v > 0.9 && v <= 1.0;
  }
  EXPECT_EQ(g[kLow].members.size(), low);
  EXPECT_EQ(g[kMiddle].members.size(), mid);
  EXPECT_EQ(g[kHigh].members.size(), high);
  const auto again = group_by_label(y);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(again[i].members, g[i].members);
}

TEST(Barycenter, SingleMirroredAndRandom) {
  Tensor x = random_tensor(6, 5, 3, 1);
  const std::vector<std::size_t> one = {2};
  const auto c = barycenter(x, one, 1);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(c[t], x(2, t, 1));

  Tensor m(2, 5, 1);
  for (std::size_t t = 0; t < 5; ++t) {
    m(0, t, 0) = 3.0 + x(0, t, 0);
    m(1, t, 0) = 3.0 - x(0, t, 0);
  }
  const std::vector<std::size_t> both = {0, 1};
  for (double v : barycenter(m, both, 0)) EXPECT_NEAR(v, 3.0, 1e-15);

  const std::vector<std::size_t> members = {0, 3, 5, 1};
  const std::vector<std::size_t> shuffled = {5, 1, 0, 3};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const auto b = barycenter(x, members, ch);
    const auto p = barycenter(x, shuffled, ch);
    for (std::size_t t = 0; t < 5; ++t) {
      double ref = 0.0;
      for (std::size_t i : members) ref += x(i, t, ch);
      EXPECT_NEAR(b[t], ref / 4.0, 1e-12);
      EXPECT_NEAR(p[t], b[t], 1e-12);
    }
  }
  const std::vector<std::size_t> none;
  EXPECT_THROW(barycenter(x, none, 0), Error);
}

TEST(CycleResiduals, IdentityAlignersGiveZero) {
  const Network I = pointwise(6, 3, 3, 1.0);
  const Tensor x = random_tensor(4, 6, 3, 2);
  for (double r : cycle_residuals(I, I, x, Direction::source)) EXPECT_EQ(r, 0.0);
}

TEST(CycleResiduals, MeanEqualsCycleLoss) {
  const Tensor xs = random_tensor(5, 16, 3, 3), xt = random_tensor(5, 16, 4, 4);
  Network F(nn::Shape{16, 4}, {nn::Conv1d{4, 5, 3}, nn::LeakyRelu{}, nn::Conv1d{5, 3, 1}, nn::Linear{}});
  Network G(nn::Shape{16, 3}, {nn::Conv1d{3, 5, 3}, nn::LeakyRelu{}, nn::Conv1d{5, 4, 1}, nn::Linear{}});
  F.initialize(1);
  G.initialize(2);
  const auto cl = dbacs::cycle_loss(F, G, xs, xt);
  const auto rs = cycle_residuals(F, G, xs, Direction::source);
  const auto rt = cycle_residuals(F, G, xt, Direction::target);
  double ms = 0.0, mt = 0.0;
  for (double v : rs) ms += v / static_cast<double>(rs.size());
  for (double v : rt) mt += v / static_cast<double>(rt.size());
  EXPECT_NEAR(ms, cl.source, 1e-10);
  EXPECT_NEAR(mt, cl.target, 1e-10);
  EXPECT_THROW(cycle_residuals(F, G, xt, Direction::source), Error);
}

TEST(CrossDomainMatch, ConstructedInverseReproducesTargetMiddle) {
  const ConstructedScenario s = constructed_inverse_scenario(300, 16, 5);
  ASSERT_EQ(s.ys, s.yt);
  const MatchReport r = cross_domain_match(s.G, s.xs, s.ys, s.xt, s.yt);
  ASSERT_GT(r.source_group_sizes[kMiddle], 0u);
  double worst = 0.0;
  for (std::size_t c = 0; c < s.xt.channels(); ++c)
    for (std::size_t t = 0; t < 16; ++t)
      worst = std::max(worst, std::abs(r.mapped_middle[c][t] - r.target_curves[kMiddle][c][t]));
  EXPECT_LE(worst, 1e-6);
  EXPECT_DOUBLE_EQ(r.nearest_middle_share(), 1.0);
  for (const auto& g : r.gaps) EXPECT_LE(g.l2[kMiddle], 1e-6);
}

TEST(CrossDomainMatch, CurveLengthsAndGapsAreWellFormed) {
  const ConstructedScenario s = constructed_inverse_scenario(200, 12, 6);
  const MatchReport r = cross_domain_match(s.G, s.xs, s.ys, s.xt, s.yt);
  for (int g = 0; g < 3; ++g) {
    for (const auto& c : r.target_curves[g]) EXPECT_EQ(c.size(), 12u);
    for (const auto& c : r.source_curves[g]) EXPECT_EQ(c.size(), 12u);
  }
  for (const auto& c : r.mapped_middle) EXPECT_EQ(c.size(), 12u);
  for (const auto& g : r.gaps)
    for (int k = 0; k < 3; ++k) {
      EXPECT_GE(g.l2[k], 0.0);
      EXPECT_GE(g.max_abs[k], 0.0);
    }
  const auto j = r.to_json();
  EXPECT_EQ(j["channels"].size(), s.xt.channels());
  EXPECT_EQ(j["groups"]["middle"]["source_count"], r.source_group_sizes[kMiddle]);
}

TEST(CrossDomainMatch, EmptyMiddleGroupIsAnError) {
  const ConstructedScenario s = constructed_inverse_scenario(100, 12, 7);
  std::vector<double> ys(s.ys.size(), 0.05);
  try {
    cross_domain_match(s.G, s.xs, ys, s.xt, s.yt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}
