#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "insyn/nn.hpp"

namespace insyn {

// Versioned binary checkpoint: after the magic, a JSON metadata blob (model
// hyperparameters, normalization stats, config hash), then named tensors as
// shape plus raw little-endian float32 values. Parameters are stored per
// section ("encoder", "generator", "cvae") with section/name keys.
void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const nn::ParamSet*>>& sections);

// Loads into already-constructed ParamSets; every tensor must match by name
// and shape or the load fails.
nlohmann::json load_checkpoint(const std::string& path,
                               const std::vector<std::pair<std::string, nn::ParamSet*>>& sections);

// Reads only the metadata blob.
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace insyn
