#pragma once
// Equipment matching: label-stratified barycenters, cycle residuals and the
// comparison of mapped source signals against target groups.
#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hda/datasets.hpp"
#include "hda/dbacs.hpp"
#include "json.hpp"

namespace hda::matching {

using nn::Network;
using nn::Tensor;

// low = [0, 0.1), middle = [0.4, 0.6], high = (0.9, 1]
struct LabelGroup {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = true;
  std::vector<std::size_t> members;
  bool contains(double label) const;
};

enum Group { kLow = 0, kMiddle = 1, kHigh = 2 };
inline constexpr std::array<const char*, 3> kGroupNames = {"low", "middle", "high"};

std::array<LabelGroup, 3> label_groups();
std::array<LabelGroup, 3> group_by_label(std::span<const double> labels);

// Pointwise mean over the selected samples of one channel (length T).
std::vector<double> barycenter(const Tensor& x, std::span<const std::size_t> members, std::size_t channel);

enum class Direction { source, target };

// source: mean |F(G(x_i)) - x_i| per sample; target: mean |G(F(x_i)) - x_i|.
std::vector<double> cycle_residuals(const Network& F, const Network& G, const Tensor& x, Direction d);

struct ChannelGap {
  std::string channel;
  std::array<double, 3> l2{};        // mapped-middle vs target low / middle / high
  std::array<double, 3> max_abs{};
  Group nearest = kMiddle;
};

struct MatchReport {
  std::size_t time = 0;
  std::vector<std::string> source_channels;
  std::vector<std::string> target_channels;
  std::array<std::size_t, 3> source_group_sizes{};
  std::array<std::size_t, 3> target_group_sizes{};
  // [group][channel] -> curve
  std::array<std::vector<std::vector<double>>, 3> source_curves;
  std::array<std::vector<std::vector<double>>, 3> target_curves;
  std::vector<std::vector<double>> mapped_middle;  // G(source middle) in target space, per target channel
  std::vector<ChannelGap> gaps;
  std::vector<double> cycle_source;  // optional, filled by the caller
  std::vector<double> cycle_target;

  double nearest_middle_share() const;
  nlohmann::json to_json() const;
  // One CSV per target channel: t, target_low, target_middle, target_high, mapped_source_middle.
  void write(const std::filesystem::path& dir, bool plots) const;
};

// Maps the source middle group through G and compares its barycenters with
// the target groups. Labels must already be normalized to [0, 1].
MatchReport cross_domain_match(const Network& G, const Tensor& xs, std::span<const double> ys,
                               const Tensor& xt, std::span<const double> yt,
                               std::vector<std::string> source_channels = {},
                               std::vector<std::string> target_channels = {});

double median(std::vector<double> v);

// --- constructed ground truth ------------------------------------------------

// Noise-free paired generator run with an exact affine G between the
// informative channels: G x_S = M_T M_S^+ (x_S - b_S) + b_T per time step.
struct ConstructedScenario {
  Tensor xs, xt;
  std::vector<double> ys, yt;  // min-max normalized, identical by construction
  Network G;
};
ConstructedScenario constructed_inverse_scenario(std::size_t samples, std::size_t time, std::uint64_t seed);

}  // namespace hda::matching
