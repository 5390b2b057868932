#include <cmath>

#include "hda/error.hpp"
#include "hda/pipeline.hpp"

namespace hda::pipeline {

using nlohmann::json;

namespace {

json integer(std::int64_t min) { return {{"type", "integer"}, {"minimum", min}}; }
json number(double min, double max) { return {{"type", "number"}, {"minimum", min}, {"maximum", max}}; }
json boolean() { return {{"type", "boolean"}}; }

json object(json props) {
  return {{"type", "object"}, {"additionalProperties", false}, {"properties", std::move(props)}};
}

json predictor_schema() {
  return object({{"max_epochs", integer(1)},
                 {"patience", integer(1)},
                 {"batch_size", integer(1)},
                 {"validation_fraction", {{"type", "number"}, {"exclusiveMinimum", 0}, {"exclusiveMaximum", 1}}}});
}

std::string type_of(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  return "null";
}

std::string escape_pointer(const std::string& key) {
  std::string o;
  for (char c : key) {
    if (c == '~') o += "~0";
    else if (c == '/') o += "~1";
    else o += c;
  }
  return o;
}

[[noreturn]] void reject(const std::string& ptr, const std::string& what) {
  fail(ErrorKind::config, "config " + (ptr.empty() ? std::string("/") : ptr) + ": " + what, ptr.empty() ? "/" : ptr);
}

void check(const json& v, const json& s, const std::string& ptr) {
  const std::string want = s.at("type");
  const std::string got = type_of(v);
  const bool ok = got == want || (want == "number" && got == "integer");
  if (!ok) reject(ptr, "expected " + want + ", got " + got);
  if (want == "object") {
    const json& props = s.at("properties");
    for (const auto& [k, child] : v.items()) {
      if (!props.contains(k)) reject(ptr + "/" + escape_pointer(k), "unknown key");
      check(child, props.at(k), ptr + "/" + escape_pointer(k));
    }
    return;
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s.at("enum")) found = found || e == v;
    if (!found) reject(ptr, "value " + v.dump() + " is not one of " + s.at("enum").dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s.at("minimum").get<double>()) reject(ptr, "must be >= " + s.at("minimum").dump());
    if (s.contains("maximum") && x > s.at("maximum").get<double>()) reject(ptr, "must be <= " + s.at("maximum").dump());
    if (s.contains("exclusiveMinimum") && !(x > s.at("exclusiveMinimum").get<double>()))
      reject(ptr, "must be > " + s.at("exclusiveMinimum").dump());
    if (s.contains("exclusiveMaximum") && !(x < s.at("exclusiveMaximum").get<double>()))
      reject(ptr, "must be < " + s.at("exclusiveMaximum").dump());
  }
}

json without_seed(json j) {
  j.erase("seed");
  return j;
}

}  // namespace

json config_schema() {
  json s = object(
      {{"seed", integer(0)},
       {"preset", {{"type", "string"}, {"enum", dbacs::preset_names()}}},
       {"generator", object({{"latent_dim", integer(1)},
                             {"source_channels", integer(1)},
                             {"target_channels", integer(1)},
                             {"source_constant", integer(0)},
                             {"source_noise_constant", integer(0)},
                             {"target_constant", integer(0)},
                             {"target_noise_constant", integer(0)},
                             {"time_steps", integer(8)},
                             {"source_samples", integer(50)},
                             {"target_samples", integer(50)},
                             {"channel_noise", number(0, 1e6)},
                             {"label_noise", number(0, 1e6)},
                             {"drift", number(0, 1e6)},
                             {"amplitude_spread", number(0, 1e6)},
                             {"nonlinear", boolean()},
                             {"length_jitter", boolean()},
                             {"length_outlier_fraction", number(0, 0.5)},
                             {"label_outlier_fraction", number(0, 0.49)},
                             {"paired_latents", boolean()}})},
       {"preprocessing", object({{"fluctuation_threshold", number(0, 1e6)},
                                 {"slope_threshold", number(0, 1e6)},
                                 {"noise_constant_share", number(0, 1)},
                                 {"iqr_multiplier", number(0, 1e6)},
                                 {"length_low_quantile", number(0, 1)},
                                 {"length_high_quantile", number(0, 1)},
                                 {"normalize", boolean()}})},
       {"dbacs", object({{"weights", object({{"adv_source", number(0, 1e6)},
                                             {"adv_target", number(0, 1e6)},
                                             {"pred", number(0, 1e6)},
                                             {"cycle", number(0, 1e6)},
                                             {"gp", number(0, 1e6)}})},
                         {"schedule", object({{"epochs", integer(0)},
                                              {"batch_size", integer(1)},
                                              {"critic_steps", integer(1)},
                                              {"pretrain_epochs", integer(0)},
                                              {"gp_guard", number(0, 1e12)}})},
                         {"predictor", predictor_schema()}})},
       {"cv", object({{"folds", integer(2)}})},
       {"baselines", object({{"variance_threshold", number(0, 1)},
                             {"cca_components", integer(0)},
                             {"cca_grid_step", integer(1)},
                             {"predictor", predictor_schema()}})},
       {"match", object({{"fold", integer(0)}, {"plots", boolean()}})}});
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["title"] = "hda run configuration";
  return s;
}

void validate_config(const json& j) { check(j, config_schema(), ""); }

std::uint64_t derived_seed(std::uint64_t master, SeedUse use, std::size_t fold) {
  // splitmix64 of (master, use, fold): independent streams per component.
  std::uint64_t z = master * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(use) * 0xbf58476d1ce4e5b9ULL +
                    static_cast<std::uint64_t>(fold) * 0x94d049bb133111ebULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

json RunConfig::to_json() const {
  return {{"seed", seed},
          {"preset", preset},
          {"generator", without_seed(generator.to_json())},
          {"preprocessing", preprocessing.to_json()},
          {"dbacs",
           {{"weights", weights.to_json()},
            {"schedule", without_seed(schedule.to_json())},
            {"predictor", without_seed(predictor.to_json())}}},
          {"cv", {{"folds", folds}}},
          {"baselines",
           {{"variance_threshold", baselines.variance_threshold},
            {"cca_components", baselines.cca_components},
            {"cca_grid_step", baselines.cca_grid_step},
            {"predictor", without_seed(baselines.predictor.to_json())}}},
          {"match", {{"fold", match.fold}, {"plots", match.plots}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  validate_config(j);
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.preset = j.value("preset", c.preset);
  const json empty = json::object();
  auto section = [&](const json& parent, const char* key) -> const json& {
    return parent.contains(key) ? parent.at(key) : empty;
  };
  c.generator = data::GeneratorConfig::from_json(section(j, "generator"));
  c.preprocessing = data::PreprocessParams::from_json(section(j, "preprocessing"));
  const json& d = section(j, "dbacs");
  c.weights = dbacs::LossWeights::from_json(section(d, "weights"));
  c.schedule = dbacs::TrainSchedule::from_json(section(d, "schedule"));
  c.predictor = dbacs::PredictorSchedule::from_json(section(d, "predictor"));
  c.folds = section(j, "cv").value("folds", c.folds);
  const json& b = section(j, "baselines");
  c.baselines.variance_threshold = b.value("variance_threshold", c.baselines.variance_threshold);
  c.baselines.cca_components = b.value("cca_components", c.baselines.cca_components);
  c.baselines.cca_grid_step = b.value("cca_grid_step", c.baselines.cca_grid_step);
  c.baselines.predictor = dbacs::PredictorSchedule::from_json(section(b, "predictor"));
  const json& m = section(j, "match");
  c.match.fold = m.value("fold", c.match.fold);
  c.match.plots = m.value("plots", c.match.plots);
  if (c.match.fold >= c.folds) reject("/match/fold", "must be smaller than /cv/folds");
  c.generator.seed = c.seed;
  return c;
}

}  // namespace hda::pipeline
