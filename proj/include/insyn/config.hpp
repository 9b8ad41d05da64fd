#pragma once

#include <iosfwd>
#include <string>

#include "insyn/model.hpp"
#include "insyn/training.hpp"

namespace insyn {

// Resolved run configuration: defaults, then config file, then flag overrides.
// Unknown keys are rejected.
struct RunConfig {
  uint64_t seed = 1;
  double radius = 2.0;  // neighbor radius in meters
  int k = 20;           // sample count for best-of-K
  int jobs = 1;
  ModelConfig model;
  TrainConfig train;
  bool augment_rot = false;
  bool augment_scale = false;

  RunConfig() {
    // one seed drives every stage; TrainConfig mirrors it after overrides
    train.seed = seed;
  }
};

void apply_config_file(RunConfig& config, const std::string& path);
void apply_config_text(RunConfig& config, std::istream& in, const std::string& source);
// "key=value" override, same key set as the config file.
void apply_override(RunConfig& config, const std::string& assignment);

// Rejects out-of-range values (radius, K, dims, rates) before any work runs.
void validate(const RunConfig& config);

// Canonical "key = value" listing of every field.
std::string canonical_text(const RunConfig& config);
// FNV-1a hash of the canonical text, 16 hex chars; stamped into artifacts.
std::string config_hash(const RunConfig& config);
// Hash over the fields a checkpoint must agree on with evaluation: model
// dimensions, radius and ablation flags.
std::string model_hash(const RunConfig& config);

void echo_config(std::ostream& out, const RunConfig& config);

}  // namespace insyn
