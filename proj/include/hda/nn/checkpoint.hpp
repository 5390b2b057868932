#pragma once

// Network checkpoint container (format "hda.network", version 1):
//
//   {
//     "format": "hda.network",
//     "version": 1,
//     "input_shape": {"time": T, "channels": C},
//     "layers": [{"kind": "conv1d", "in_channels": .., "filters": .., "kernel": .., "padding": "causal"},
//                {"kind": "dense", "in_features": .., "units": ..},
//                {"kind": "leaky_relu", "slope": 0.2}, {"kind": "sigmoid"}, {"kind": "linear"},
//                {"kind": "maxpool1d", "size": k}, {"kind": "upsample1d", "factor": k}, {"kind": "flatten"}],
//     "param_count": N,
//     "params": [N doubles, layer order, weights then biases],
//     "seed": u64,
//     "step": u64
//   }
//
// Doubles are written in shortest round-trip form, so save/load is lossless.

#include <cstdint>
#include <filesystem>

#include "json.hpp"

#include "hda/nn/network.hpp"

namespace hda::nn {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

nlohmann::json layer_to_json(const LayerSpec& spec);
LayerSpec layer_from_json(const nlohmann::json& j);

nlohmann::json network_to_json(const Network& net, const CheckpointMeta& meta = {});
Network network_from_json(const nlohmann::json& j, CheckpointMeta* meta = nullptr);

void save_network(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta = {});
// Throws ErrorKind::missing_artifact when the file does not exist and
// ErrorKind::data when it is malformed.
Network load_network(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace hda::nn
