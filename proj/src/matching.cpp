#include "hda/matching.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hda/error.hpp"
#include "hda/json_io.hpp"
#include "hda/svg.hpp"

namespace hda::matching {

bool LabelGroup::contains(double v) const {
  const bool above = lo_closed ? v >= lo : v > lo;
  const bool below = hi_closed ? v <= hi : v < hi;
  return above && below;
}

std::array<LabelGroup, 3> label_groups() {
  return {LabelGroup{"low", 0.0, 0.1, true, false, {}}, LabelGroup{"middle", 0.4, 0.6, true, true, {}},
          LabelGroup{"high", 0.9, 1.0, false, true, {}}};
}

std::array<LabelGroup, 3> group_by_label(std::span<const double> labels) {
  auto g = label_groups();
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (auto& grp : g)
      if (grp.contains(labels[i])) {
        grp.members.push_back(i);
        break;
      }
  return g;
}

std::vector<double> barycenter(const Tensor& x, std::span<const std::size_t> members, std::size_t channel) {
  require(!members.empty(), ErrorKind::data, "barycenter: empty group");
  require(channel < x.channels(), ErrorKind::shape, "barycenter: channel out of range");
  std::vector<double> curve(x.time(), 0.0);
  for (std::size_t i : members) {
    require(i < x.batch(), ErrorKind::shape, "barycenter: member index out of range");
    for (std::size_t t = 0; t < x.time(); ++t) curve[t] += x(i, t, channel);
  }
  for (double& v : curve) v /= static_cast<double>(members.size());
  return curve;
}

std::vector<double> cycle_residuals(const Network& F, const Network& G, const Tensor& x, Direction d) {
  const Network& first = d == Direction::source ? G : F;
  const Network& second = d == Direction::source ? F : G;
  require(x.shape() == first.input_shape(), ErrorKind::shape,
          "cycle residuals: input " + nn::to_string(x.shape()) + " does not match the aligner input " +
              nn::to_string(first.input_shape()));
  const Tensor back = second.forward(first.forward(x));
  require(back.shape() == x.shape(), ErrorKind::shape, "cycle residuals: aligners do not compose to the identity shape");
  std::vector<double> r(x.batch(), 0.0);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const auto a = x.sample(b), c = back.sample(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(c[i] - a[i]);
    r[b] = s / static_cast<double>(a.size());
  }
  return r;
}

double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::data, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double MatchReport::nearest_middle_share() const {
  if (gaps.empty()) return 0.0;
  const auto n = std::count_if(gaps.begin(), gaps.end(), [](const ChannelGap& g) { return g.nearest == kMiddle; });
  return static_cast<double>(n) / static_cast<double>(gaps.size());
}

MatchReport cross_domain_match(const Network& G, const Tensor& xs, std::span<const double> ys, const Tensor& xt,
                               std::span<const double> yt, std::vector<std::string> source_channels,
                               std::vector<std::string> target_channels) {
  require(ys.size() == xs.batch() && yt.size() == xt.batch(), ErrorKind::shape, "match: one label per sample");
  require(xs.time() == xt.time(), ErrorKind::shape, "match: source and target series lengths differ");
  const auto gs = group_by_label(ys), gt = group_by_label(yt);
  require(!gs[kMiddle].members.empty(), ErrorKind::data, "match: the source middle group is empty");
  for (int g = 0; g < 3; ++g)
    require(!gt[g].members.empty(), ErrorKind::data, std::string("match: the target ") + kGroupNames[g] + " group is empty");

  MatchReport r;
  r.time = xs.time();
  if (source_channels.empty())
    for (std::size_t c = 0; c < xs.channels(); ++c) source_channels.push_back("s" + std::to_string(c));
  if (target_channels.empty())
    for (std::size_t c = 0; c < xt.channels(); ++c) target_channels.push_back("t" + std::to_string(c));
  require(source_channels.size() == xs.channels() && target_channels.size() == xt.channels(), ErrorKind::shape,
          "match: channel names do not match the data");
  r.source_channels = std::move(source_channels);
  r.target_channels = std::move(target_channels);
  for (int g = 0; g < 3; ++g) {
    r.source_group_sizes[g] = gs[g].members.size();
    r.target_group_sizes[g] = gt[g].members.size();
    for (std::size_t c = 0; c < xs.channels(); ++c)
      r.source_curves[g].push_back(gs[g].members.empty() ? std::vector<double>{} : barycenter(xs, gs[g].members, c));
    for (std::size_t c = 0; c < xt.channels(); ++c) r.target_curves[g].push_back(barycenter(xt, gt[g].members, c));
  }

  const Tensor mapped = dbacs::apply_aligner(G, nn::gather(xs, gs[kMiddle].members));
  require(mapped.shape() == xt.shape(), ErrorKind::shape, "match: G does not map into the target space");
  std::vector<std::size_t> all(mapped.batch());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t c = 0; c < xt.channels(); ++c) {
    r.mapped_middle.push_back(barycenter(mapped, all, c));
    ChannelGap gap;
    gap.channel = r.target_channels[c];
    for (int g = 0; g < 3; ++g) {
      double sq = 0.0, mx = 0.0;
      for (std::size_t t = 0; t < r.time; ++t) {
        const double d = std::abs(r.mapped_middle[c][t] - r.target_curves[g][c][t]);
        sq += d * d;
        mx = std::max(mx, d);
      }
      gap.l2[g] = std::sqrt(sq);
      gap.max_abs[g] = mx;
    }
    gap.nearest = static_cast<Group>(std::min_element(gap.l2.begin(), gap.l2.end()) - gap.l2.begin());
    r.gaps.push_back(gap);
  }
  return r;
}

nlohmann::json MatchReport::to_json() const {
  nlohmann::json j;
  j["time"] = time;
  j["groups"] = nlohmann::json::object();
  for (int g = 0; g < 3; ++g)
    j["groups"][kGroupNames[g]] = {{"source_count", source_group_sizes[g]}, {"target_count", target_group_sizes[g]}};
  j["nearest_middle_share"] = nearest_middle_share();
  nlohmann::json gj = nlohmann::json::array();
  for (const auto& g : gaps) {
    gj.push_back({{"channel", g.channel},
                  {"l2", {{"low", g.l2[0]}, {"middle", g.l2[1]}, {"high", g.l2[2]}}},
                  {"max_abs", {{"low", g.max_abs[0]}, {"middle", g.max_abs[1]}, {"high", g.max_abs[2]}}},
                  {"nearest", kGroupNames[g.nearest]}});
  }
  j["channels"] = gj;
  auto summary = [](const std::vector<double>& v) -> nlohmann::json {
    if (v.empty()) return nullptr;
    double s = 0.0;
    for (double x : v) s += x;
    return {{"count", v.size()}, {"mean", s / static_cast<double>(v.size())}, {"median", median(v)}};
  };
  j["cycle_residuals"] = {{"source", summary(cycle_source)}, {"target", summary(cycle_target)}};
  return j;
}

void MatchReport::write(const std::filesystem::path& dir, bool plots) const {
  write_json_file(dir / "match_report.json", to_json());
  for (std::size_t c = 0; c < target_channels.size(); ++c) {
    std::ostringstream os;
    os << "t,target_low,target_middle,target_high,mapped_source_middle\n";
    for (std::size_t t = 0; t < time; ++t)
      os << t << ',' << format_double(target_curves[0][c][t]) << ',' << format_double(target_curves[1][c][t]) << ','
         << format_double(target_curves[2][c][t]) << ',' << format_double(mapped_middle[c][t]) << '\n';
    write_text_file(dir / "curves" / (target_channels[c] + ".csv"), os.str());
    if (plots) {
      const std::vector<svg::Series> s = {{"target low", "#1f77b4", target_curves[0][c]},
                                          {"target middle", "#2ca02c", target_curves[1][c]},
                                          {"target high", "#d62728", target_curves[2][c]},
                                          {"mapped source middle", "#000000", mapped_middle[c], {}, true}};
      write_text_file(dir / "plots" / (target_channels[c] + ".svg"),
                      svg::line_plot("barycenters, channel " + target_channels[c], s));
    }
  }
}

ConstructedScenario constructed_inverse_scenario(std::size_t samples, std::size_t time, std::uint64_t seed) {
  data::GeneratorConfig g;
  g.source_samples = samples;
  g.target_samples = samples;
  g.time_steps = time;
  g.channel_noise = 0.0;
  g.label_noise = 0.0;
  g.length_jitter = false;
  g.label_outlier_fraction = 0.0;
  g.paired_latents = true;
  g.seed = seed;
  const auto pair = data::generate_pair(g);
  const auto& truth = pair.truth;
  const std::size_t cs = static_cast<std::size_t>(truth.source_mixing.rows());
  const std::size_t ct = static_cast<std::size_t>(truth.target_mixing.rows());

  auto informative = [&](const data::DomainDataset& ds, std::size_t C) {
    Tensor x(ds.size(), time, C);
    for (std::size_t b = 0; b < ds.size(); ++b)
      for (std::size_t t = 0; t < time; ++t)
        for (std::size_t c = 0; c < C; ++c)
          x(b, t, c) = ds.samples[b].values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
    return x;
  };
  ConstructedScenario s;
  s.xs = informative(pair.source, cs);
  s.xt = informative(pair.target, ct);
  s.ys = data::normalize_labels(pair.source).labels();
  s.yt = data::normalize_labels(pair.target).labels();

  const linalg::Mat pinv = truth.source_mixing.completeOrthogonalDecomposition().pseudoInverse();
  const linalg::Mat W = truth.target_mixing * pinv;  // C_T x C_S
  const linalg::Vec bias = truth.target_offset - W * truth.source_offset;
  s.G = Network(nn::Shape{time, cs}, {nn::Dense{cs, ct}, nn::Linear{}});
  auto p = s.G.params();
  for (std::size_t u = 0; u < ct; ++u) {
    for (std::size_t c = 0; c < cs; ++c) p[u * cs + c] = W(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(c));
    p[ct * cs + u] = bias(static_cast<Eigen::Index>(u));
  }
  return s;
}

}  // namespace hda::matching
