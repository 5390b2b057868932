#include "hda/nn/checkpoint.hpp"

#include "hda/error.hpp"
#include "hda/json_io.hpp"

namespace hda::nn {

namespace {

constexpr const char* kFormat = "hda.network";
constexpr int kVersion = 1;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

nlohmann::json layer_to_json(const LayerSpec& spec) {
  nlohmann::json j;
  j["kind"] = std::string(kind_name(spec));
  std::visit(Overloaded{
                 [&](const Conv1d& c) {
                   j["in_channels"] = c.in_channels;
                   j["filters"] = c.filters;
                   j["kernel"] = c.kernel;
                   j["padding"] = c.padding == Padding::causal ? "causal" : "none";
                 },
                 [&](const Dense& d) {
                   j["in_features"] = d.in_features;
                   j["units"] = d.units;
                 },
                 [&](const LeakyRelu& a) { j["slope"] = a.slope; },
                 [&](const MaxPool1d& p) { j["size"] = p.size; },
                 [&](const Upsample1d& u) { j["factor"] = u.factor; },
                 [](const auto&) {},
             },
             spec);
  return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv1d") {
      const std::string pad = j.at("padding").get<std::string>();
      if (pad != "causal" && pad != "none") fail(ErrorKind::data, "unknown padding '" + pad + "'");
      return Conv1d{j.at("in_channels").get<std::size_t>(), j.at("filters").get<std::size_t>(),
                    j.at("kernel").get<std::size_t>(), pad == "causal" ? Padding::causal : Padding::none};
    }
    if (kind == "dense") return Dense{j.at("in_features").get<std::size_t>(), j.at("units").get<std::size_t>()};
    if (kind == "leaky_relu") return LeakyRelu{j.value("slope", 0.2)};
    if (kind == "sigmoid") return Sigmoid{};
    if (kind == "linear") return Linear{};
    if (kind == "maxpool1d") return MaxPool1d{j.at("size").get<std::size_t>()};
    if (kind == "upsample1d") return Upsample1d{j.at("factor").get<std::size_t>()};
    if (kind == "flatten") return Flatten{};
    fail(ErrorKind::data, "unknown layer kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed layer spec: ") + e.what());
  }
}

nlohmann::json network_to_json(const Network& net, const CheckpointMeta& meta) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["input_shape"] = {{"time", net.input_shape().time}, {"channels", net.input_shape().channels}};
  j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) j["layers"].push_back(layer_to_json(l));
  j["param_count"] = net.param_count();
  j["params"] = std::vector<double>(net.params().begin(), net.params().end());
  j["seed"] = meta.seed;
  j["step"] = meta.step;
  return j;
}

Network network_from_json(const nlohmann::json& j, CheckpointMeta* meta) {
  try {
    if (j.at("format").get<std::string>() != kFormat) fail(ErrorKind::data, "not an hda.network checkpoint");
    if (j.at("version").get<int>() != kVersion) {
      fail(ErrorKind::data, "unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    }
    const Shape input{j.at("input_shape").at("time").get<std::size_t>(),
                      j.at("input_shape").at("channels").get<std::size_t>()};
    std::vector<LayerSpec> layers;
    for (const auto& l : j.at("layers")) layers.push_back(layer_from_json(l));
    Network net(input, std::move(layers));
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != j.at("param_count").get<std::size_t>() || params.size() != net.param_count()) {
      fail(ErrorKind::data, "checkpoint parameter count does not match its layer specs");
    }
    net.set_params(params);
    if (meta) {
      meta->seed = j.at("seed").get<std::uint64_t>();
      meta->step = j.at("step").get<std::uint64_t>();
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_network(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta) {
  write_json_file(path, network_to_json(net, meta));
}

Network load_network(const std::filesystem::path& path, CheckpointMeta* meta) {
  const nlohmann::json j = read_json_file(path);
  try {
    return network_from_json(j, meta);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what(), path.string());
  }
}

}  // namespace hda::nn
