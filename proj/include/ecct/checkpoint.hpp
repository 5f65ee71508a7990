#pragma once

#include "ecct/model.hpp"

#include <json.hpp>

#include <string>

namespace ecct {

constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const ECCTConfig& cfg);
ECCTConfig config_from_json(const nlohmann::json& j);

/// JSON container: {"format", "version", "config", "tensors": {name: {rows, cols, data}}}.
/// Doubles are written with round-trip precision, so save/load is bit-exact.
nlohmann::json checkpoint_to_json(const ECCTConfig& cfg, const ECCTWeights& w);
std::pair<ECCTConfig, ECCTWeights> checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const ECCTConfig& cfg, const ECCTWeights& w);
std::pair<ECCTConfig, ECCTWeights> load_checkpoint(const std::string& path);

}  // namespace ecct
