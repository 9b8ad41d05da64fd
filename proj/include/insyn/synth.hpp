#pragma once

#include <map>
#include <string>
#include <vector>

#include "insyn/interaction.hpp"
#include "insyn/scene.hpp"

namespace insyn::synth {

enum class ScenarioKind { LoneWalker, InSyncPair, HeadOnConflict, CrossingConflict, Mixed };

ScenarioKind scenario_kind_from_string(const std::string& name);
const char* to_string(ScenarioKind kind);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::LoneWalker;
  int steps = 20;
  double speed = 1.2;   // m/s
  double noise = 0.0;   // position noise std-dev, added after labeling
  uint64_t seed = 1;
  double radius = 2.0;  // neighborhood radius the construction targets
  double offset = 0.5;  // lateral separation of an in-sync pair
  int entry_step = 5;   // step at which a conflicting walker first enters
  int mixed_groups = 4; // sub-scenarios composed into a Mixed scene
};

// A scene plus the interaction labels implied by its construction. The labels
// come from a direct per-step scan over the constructed tracks, independent of
// the interaction module.
struct LabeledScene {
  Scene scene;
  std::map<PedId, std::vector<InteractionInfo>> expected;  // indexed from step 0
};

LabeledScene generate(const ScenarioSpec& spec);

struct LabelMismatch {
  PedId agent = 0;
  int step = 0;
  RegionId region = RegionId::LU;
  InteractionState expected_state = InteractionState::NoNeighbor;
  InteractionState got_state = InteractionState::NoNeighbor;
  double expected_distance = 0.0;
  double got_distance = 0.0;
};

// Diffs extract_walking_states against the construction labels; empty means
// oracle agreement. Only meaningful for noise-free scenes.
std::vector<LabelMismatch> verify_labels(const LabeledScene& ls, double radius);

}  // namespace insyn::synth
