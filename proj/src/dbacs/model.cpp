#include <algorithm>
#include <cmath>

#include "hda/dbacs.hpp"
#include "hda/error.hpp"

namespace hda::dbacs {

using namespace nn;

namespace {

struct PresetSpec {
  bool scale_kernels = true;
  std::size_t dense_cap = 128;
  double width = 1.0;  // multiplier on conv filters and dense units
  bool aligner_resampling = false;
};

PresetSpec preset_spec(const std::string& preset) {
  if (preset == "desk") return {true, 128, 1.0, false};
  if (preset == "paper-arch") return {false, 1u << 20, 1.0, true};
  if (preset == "smoke") return {true, 32, 0.25, false};
  fail(ErrorKind::config, "unknown architecture preset '" + preset + "'");
}

std::size_t width(std::size_t n, const PresetSpec& p) {
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(static_cast<double>(n) * p.width)));
}

std::size_t kernel(std::size_t paper, std::size_t time, const PresetSpec& p) {
  return p.scale_kernels ? scaled_kernel(paper, time) : paper;
}

std::size_t dense(std::size_t n, const PresetSpec& p) { return std::min(width(n, p), p.dense_cap); }

}  // namespace

std::size_t scaled_kernel(std::size_t paper_kernel, std::size_t time) {
  auto k = static_cast<std::size_t>(
      std::ceil(static_cast<double>(paper_kernel) * static_cast<double>(time) / static_cast<double>(kReferenceLength)));
  k = std::max<std::size_t>(k, 1);
  if (k % 2 == 0) ++k;
  return k;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"desk", "paper-arch", "smoke"};
  return names;
}

bool is_known_preset(const std::string& preset) {
  const auto& n = preset_names();
  return std::find(n.begin(), n.end(), preset) != n.end();
}

std::vector<LayerSpec> predictor_layers(Shape in, const std::string& preset) {
  const PresetSpec p = preset_spec(preset);
  const std::size_t f1 = width(32, p), f2 = width(16, p), f3 = width(8, p);
  require(in.time >= 2, ErrorKind::config, "predictor needs at least 2 time steps");
  const std::size_t flat = (in.time / 2) * f3;
  return {Conv1d{in.channels, f1, kernel(53, in.time, p)}, LeakyRelu{},
          Conv1d{f1, f2, kernel(33, in.time, p)},          LeakyRelu{},
          Conv1d{f2, f3, kernel(33, in.time, p)},          LeakyRelu{},
          MaxPool1d{2},                                     Flatten{},
          Dense{flat, dense(16, p)},                        LeakyRelu{},
          Dense{dense(16, p), 1},                           Sigmoid{}};
}

std::vector<LayerSpec> critic_layers(Shape in, const std::string& preset) {
  const PresetSpec p = preset_spec(preset);
  require(in.time >= 16, ErrorKind::config, "critics need at least 16 time steps (pooling 4, 2, 2)");
  const std::size_t f1 = width(24, p), f2 = width(16, p), f3 = width(8, p);
  const std::size_t k = kernel(17, in.time, p);
  std::vector<LayerSpec> layers = {Conv1d{in.channels, f1, k}, LeakyRelu{}, MaxPool1d{4},
                                   Conv1d{f1, f2, k},          LeakyRelu{}, MaxPool1d{2},
                                   Conv1d{f2, f3, k},          LeakyRelu{}, MaxPool1d{2},
                                   Flatten{}};
  std::size_t prev = ((in.time / 4) / 2 / 2) * f3;
  for (std::size_t units : {512, 256, 128, 64, 32}) {
    const std::size_t u = dense(units, p);
    layers.push_back(Dense{prev, u});
    layers.push_back(LeakyRelu{});
    prev = u;
  }
  layers.push_back(Dense{prev, 1});
  layers.push_back(Linear{});
  return layers;
}

std::vector<LayerSpec> aligner_layers(Shape in, std::size_t out_channels, bool to_source, const std::string& preset) {
  const PresetSpec p = preset_spec(preset);
  const std::vector<std::size_t> filters = to_source ? std::vector<std::size_t>{48, 42, 36, 32, 32}
                                                     : std::vector<std::size_t>{32, 36, 42, 46, 48};
  const std::vector<std::size_t> kernels = {37, 37, 37, 37, 57, 7};
  if (p.aligner_resampling) {
    require(in.time % 6 == 0, ErrorKind::config,
            "paper-arch aligners pool by 2 and 3 and upsample back; the series length must be a multiple of 6");
  }
  std::vector<LayerSpec> layers;
  std::size_t prev = in.channels;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t f = width(filters[i], p);
    layers.push_back(Conv1d{prev, f, kernel(kernels[i], in.time, p)});
    layers.push_back(LeakyRelu{});
    if (p.aligner_resampling) {
      // Downsampling that the published upsampling after blocks 4 and 5 undoes.
      if (i == 0) layers.push_back(MaxPool1d{2});
      if (i == 1) layers.push_back(MaxPool1d{3});
      if (i == 3) layers.push_back(Upsample1d{3});
      if (i == 4) layers.push_back(Upsample1d{2});
    }
    prev = f;
  }
  layers.push_back(Conv1d{prev, out_channels, kernel(kernels[5], in.time, p)});
  layers.push_back(Linear{});
  return layers;
}

DbacsModel make_model(Shape source, Shape target, const std::string& preset, std::uint64_t seed) {
  require(source.time == target.time, ErrorKind::shape,
          "source and target series must share a length (" + to_string(source) + " vs " + to_string(target) + ")");
  DbacsModel m;
  m.source = source;
  m.target = target;
  m.P = Network(source, predictor_layers(source, preset));
  m.F = Network(target, aligner_layers(target, source.channels, true, preset));
  m.G = Network(source, aligner_layers(source, target.channels, false, preset));
  m.DA = Network(source, critic_layers(source, preset));
  m.DB = Network(target, critic_layers(target, preset));
  m.P.initialize(seed);
  m.F.initialize(seed + 1);
  m.G.initialize(seed + 2);
  m.DA.initialize(seed + 3);
  m.DB.initialize(seed + 4);
  return m;
}

nlohmann::json LossWeights::to_json() const {
  return {{"adv_source", adv_source}, {"adv_target", adv_target}, {"pred", pred}, {"cycle", cycle}, {"gp", gp}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.adv_source = j.value("adv_source", w.adv_source);
  w.adv_target = j.value("adv_target", w.adv_target);
  w.pred = j.value("pred", w.pred);
  w.cycle = j.value("cycle", w.cycle);
  w.gp = j.value("gp", w.gp);
  for (double v : {w.adv_source, w.adv_target, w.pred, w.cycle, w.gp}) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::config, "loss weights must be finite and nonnegative");
  }
  return w;
}

nlohmann::json TrainSchedule::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"critic_steps", critic_steps},
          {"pretrain_epochs", pretrain_epochs},
          {"gp_guard", gp_guard},
          {"seed", seed}};
}

TrainSchedule TrainSchedule::from_json(const nlohmann::json& j) {
  TrainSchedule s;
  s.epochs = j.value("epochs", s.epochs);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.critic_steps = j.value("critic_steps", s.critic_steps);
  s.pretrain_epochs = j.value("pretrain_epochs", s.pretrain_epochs);
  s.gp_guard = j.value("gp_guard", s.gp_guard);
  s.seed = j.value("seed", s.seed);
  require(s.gp_guard >= 0.0, ErrorKind::config, "gp_guard must be >= 0");
  require(s.batch_size >= 1 && s.critic_steps >= 1, ErrorKind::config, "batch_size and critic_steps must be >= 1");
  return s;
}

nlohmann::json PredictorSchedule::to_json() const {
  return {{"max_epochs", max_epochs},
          {"patience", patience},
          {"batch_size", batch_size},
          {"validation_fraction", validation_fraction},
          {"seed", seed}};
}

PredictorSchedule PredictorSchedule::from_json(const nlohmann::json& j) {
  PredictorSchedule s;
  s.max_epochs = j.value("max_epochs", s.max_epochs);
  s.patience = j.value("patience", s.patience);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.validation_fraction = j.value("validation_fraction", s.validation_fraction);
  s.seed = j.value("seed", s.seed);
  require(s.batch_size >= 1 && s.patience >= 1, ErrorKind::config, "predictor batch_size and patience must be >= 1");
  require(s.validation_fraction > 0.0 && s.validation_fraction < 1.0, ErrorKind::config,
          "validation_fraction must lie in (0, 1)");
  return s;
}

}  // namespace hda::dbacs
