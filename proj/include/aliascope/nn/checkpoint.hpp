#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "aliascope/nn/train.hpp"

namespace aliascope::nn {

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Binary checkpoint: "ALCK", u32 version, u32-length-prefixed JSON header,
/// named f32 tensors (parameters, batchnorm buffers, Adam moments), CRC32.
std::vector<std::uint8_t> encode_checkpoint(Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aliascope::nn
