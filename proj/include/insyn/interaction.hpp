#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "insyn/scene.hpp"

namespace insyn {

// Distance assigned to empty regions; its reciprocal is ~0, i.e. no influence.
inline constexpr double kLargeDistance = 1000.0;

// Agent-centred quadrants in canonical order.
enum class RegionId { LU = 0, RU = 1, LD = 2, RD = 3 };
inline constexpr int kNumRegions = 4;
inline constexpr std::array<RegionId, 4> kRegionOrder = {RegionId::LU, RegionId::RU,
                                                         RegionId::LD, RegionId::RD};

enum class InteractionState { NoNeighbor = 0, InSync = 1, Conflict = 2 };

const char* to_string(RegionId region);
const char* to_string(InteractionState state);

// Nearest-neighbor summary for one region at one step.
struct RegionSlot {
  InteractionState state = InteractionState::NoNeighbor;
  double distance = kLargeDistance;
  std::optional<PedId> occupant;
};

inline bool operator==(const RegionSlot& a, const RegionSlot& b) {
  return a.state == b.state && a.distance == b.distance && a.occupant == b.occupant;
}

struct InteractionInfo {
  std::array<RegionSlot, kNumRegions> slots;  // canonical order LU, RU, LD, RD

  const RegionSlot& slot(RegionId region) const { return slots[static_cast<int>(region)]; }
  RegionSlot& slot(RegionId region) { return slots[static_cast<int>(region)]; }
};

struct WalkingState {
  Position position;
  InteractionInfo interaction;
};

// Half-open world-frame quadrant of (other - agent):
//   LU: dx < 0 && dy >= 0    RU: dx >= 0 && dy > 0
//   LD: dx <= 0 && dy < 0    RD: dx > 0 && dy <= 0
// Exhaustive and disjoint for non-coincident points, and a 90-degree rotation
// maps each region's point set exactly onto the next region's.
RegionId region_of(const Position& agent, const Position& other);

struct RegionOccupancy {
  std::array<std::optional<std::pair<PedId, double>>, kNumRegions> regions;

  const std::optional<std::pair<PedId, double>>& at(RegionId region) const {
    return regions[static_cast<int>(region)];
  }
};

// Nearest neighbor (within radius) per region; ties broken by ped id.
// Neighbors exactly at the agent's position have no defined region and are
// skipped.
RegionOccupancy nearest_in_regions(const Scene& scene, int step, PedId agent, double radius);

// Single-disk variant used by the no-region-partition ablation: the nearest
// neighbor overall fills every slot.
RegionOccupancy nearest_overall(const Scene& scene, int step, PedId agent, double radius);

// Per region: empty -> NoNeighbor; same occupant as prev -> InSync;
// otherwise -> Conflict. Distances come from curr.
InteractionInfo classify_step(const RegionOccupancy& prev, const RegionOccupancy& curr);

enum class RegionMode {
  FourQuadrants,
  SingleNearest,  // w/o region partition ablation
};

// Walking states for [first_step, first_step + count). Classification at the
// first step looks back one scene step when the agent exists there; otherwise
// prev is treated as all-absent (occupied regions start as Conflict).
std::vector<WalkingState> extract_walking_states(const Scene& scene, PedId agent, int first_step,
                                                 int count, double radius,
                                                 RegionMode mode = RegionMode::FourQuadrants);

// "step x y | state:dist x4" lines, states encoded 0/1/2, regions LU,RU,LD,RD.
void write_walking_states(std::ostream& out, const std::vector<WalkingState>& states,
                          int first_step);

}  // namespace insyn
