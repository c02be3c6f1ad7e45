#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "bondrisk/models.hpp"

namespace bondrisk {

struct CheckpointInfo {
  std::string registry_hash;
  std::string dataset_hash;
  TrainResult trace;
};

// Binary layout: "BRCK" magic, u32 version, u64 header length, JSON header
// (architecture, optimizer, hashes, loss trace, parameter shapes or trees),
// then the neural parameters as little-endian float32 in declaration order.
void save_checkpoint(const std::filesystem::path& path, Model& model, const CheckpointInfo& info);
Model load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

nlohmann::json trace_to_json(const TrainResult& r);
TrainResult trace_from_json(const nlohmann::json& j);

}  // namespace bondrisk
